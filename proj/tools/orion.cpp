#include <iostream>

#include "orion/cli.hpp"

int main(int argc, char** argv) { return orion::cli::main(argc, argv, std::cout, std::cerr); }
