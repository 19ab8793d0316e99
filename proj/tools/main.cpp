#include <iostream>

#include "panerf_cli/cli.hpp"

int main(int argc, char** argv) { return panerf::cli::run(argc, argv, std::cout, std::cerr); }
