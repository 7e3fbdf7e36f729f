#pragma once

#include <string>
#include <vector>

namespace plasmo::cli {

inline constexpr const char* kVersion = "0.1.0";

// parses argv, routes to the module entry points; returns the process exit
// code (0 ok, 2 argument errors, 1 runtime errors)
int dispatch(int argc, const char* const* argv);
int dispatch(const std::vector<std::string>& args);

}  // namespace plasmo::cli
