#include <iostream>

#include "paste/commands.hpp"

int main(int argc, char** argv) { return paste::run_cli(argc, argv, std::cout, std::cerr); }
