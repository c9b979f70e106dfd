#include <iostream>

#include "c2st_cli.hpp"

int main(int argc, char** argv) { return c2st::cli::run_cli(argc, argv, std::cout, std::cerr); }
