#include <iostream>

#include "dwellcert/cli.hpp"

int main(int argc, char** argv) { return dwellcert::run_cli(argc, argv, std::cout, std::cerr); }
