#include "elastodyn/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return elastodyn::cli::run(argc, argv, std::cout, std::cerr); }
