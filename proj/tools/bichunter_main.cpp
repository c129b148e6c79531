#include <iostream>

#include "bichunter/cli.hpp"

int main(int argc, char** argv) { return bichunter::run_cli(argc, argv, std::cout, std::cerr); }
