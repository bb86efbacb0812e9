#include <iostream>

#include "langevin/cli.hpp"

int main(int argc, char** argv) { return langevin::cli::run_cli(argc, argv, std::cout, std::cerr); }
