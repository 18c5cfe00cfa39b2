#include <iostream>

#include "jkoflow/cli.hpp"

int main(int argc, char** argv) { return jkoflow::cli_main(argc, argv, std::cout, std::cerr); }
