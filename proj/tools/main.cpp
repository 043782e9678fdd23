#include <iostream>

#include "hdpca/cli.hpp"

int main(int argc, char** argv) { return hdpca::cli_main(argc, argv, std::cout, std::cerr); }
