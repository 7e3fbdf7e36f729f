#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace plasmo {

using Complex = std::complex<double>;

// Dense containers used throughout; scalar-templated so kernels can be
// instantiated in float where speed matters and double where tests demand it.
template <class Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Col = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using GridXd = Grid<double>;
using GridXcd = Grid<Complex>;
using ColXd = Col<double>;
using MatXd = Mat<double>;
using VecXd = Vec<double>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace plasmo
