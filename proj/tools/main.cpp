#include <iostream>

#include "vidinr/cli.hpp"

int main(int argc, char** argv) { return vidinr::run_cli(argc, argv, std::cout, std::cerr); }
