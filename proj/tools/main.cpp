#include <iostream>

#include "spdebridge/cli.hpp"

int main(int argc, char** argv) { return spdebridge::run_cli(argc, argv, std::cout, std::cerr); }
