#include "homlab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return homlab::run_cli(argc, argv, std::cout, std::cerr); }
