#include <iostream>

#include "rsesf/cli.hpp"

int main(int argc, char** argv) { return rsesf::run_cli(argc, argv, std::cout, std::cerr); }
