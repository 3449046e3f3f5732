#include <iostream>

#include "symsel/cli.hpp"

int main(int argc, char** argv) { return symsel::cli::dispatch(argc, argv, std::cout, std::cerr); }
