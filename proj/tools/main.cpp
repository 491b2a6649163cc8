#include "run.hpp"

#include <iostream>

int main(int argc, char** argv) { return gwmodel::cli::main_with_args(argc, argv, std::cout, std::cerr); }
