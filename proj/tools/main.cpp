#include <iostream>

#include "rewirenet/cli.hpp"

int main(int argc, char** argv) { return rewirenet::cli::command_dispatch(argc, argv, std::cout, std::cerr); }
