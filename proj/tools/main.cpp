#include <iostream>

#include "mvcca/cli.hpp"

int main(int argc, char** argv) { return mvcca::cli::run(argc, argv, std::cout, std::cerr); }
