#include <iostream>

#include "escape/cli.hpp"

int main(int argc, char** argv) { return escape::run_cli(argc, argv, std::cout, std::cerr); }
