#include <iostream>

#include "qredshift/cli.hpp"

int main(int argc, char** argv) { return qredshift::cli::run(argc, argv, std::cout, std::cerr); }
