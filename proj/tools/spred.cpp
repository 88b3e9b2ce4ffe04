#include <iostream>

#include "spred/cli.hpp"

int main(int argc, char** argv) { return spred::run_cli(argc, argv, std::cout, std::cerr); }
