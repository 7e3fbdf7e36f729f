#include "plasmo/cli.hpp"

int main(int argc, char** argv) { return plasmo::cli::dispatch(argc, argv); }
