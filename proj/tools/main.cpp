#include <iostream>

#include "pmnet/cli.hpp"

int main(int argc, char** argv) { return pmnet::run(argc, argv, std::cout, std::cerr); }
