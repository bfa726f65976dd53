#include <iostream>

#include "opsrag_cli/cli.hpp"

int main(int argc, char** argv) { return opsrag::cli::run(argc, argv, std::cout, std::cerr); }
