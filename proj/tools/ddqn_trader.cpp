#include <iostream>

#include "ddqn/cli.hpp"

int main(int argc, char** argv) { return ddqn::cli::run(argc, argv, std::cout, std::cerr); }
