#include <iostream>

#include "lada/cli.hpp"

int main(int argc, char** argv) { return lada::cli::dispatch(argc, argv, std::cin, std::cout, std::cerr); }
