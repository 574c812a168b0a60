#include <iostream>

#include "hot/cli.hpp"

int main(int argc, char** argv) { return hot::cli::run(argc, argv, std::cout, std::cerr); }
