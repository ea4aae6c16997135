#include <iostream>

#include "aebs/harness.hpp"

int main(int argc, char** argv) { return aebs::run_cli(argc, argv, std::cout, std::cerr); }
