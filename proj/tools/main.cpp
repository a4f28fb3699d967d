#include <iostream>

#include "adasplit/cli.hpp"

int main(int argc, char** argv) { return adasplit::run_cli(argc, argv, std::cout, std::cerr); }
