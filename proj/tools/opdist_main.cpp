#include <iostream>

#include "opdist/cli.hpp"

int main(int argc, char** argv) { return opdist::run_cli(argc, argv, std::cout, std::cerr); }
