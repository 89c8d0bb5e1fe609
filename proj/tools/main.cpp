#include <iostream>

#include "pb2/cli.hpp"

int main(int argc, char **argv) { return pb2::run_cli(argc, argv, std::cout, std::cerr); }
