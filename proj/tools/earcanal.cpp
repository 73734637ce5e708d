#include <iostream>

#include "earcanal/cli/commands.hpp"

int main(int argc, char** argv) {
    return earcanal::cli::run_cli(argc, argv, std::cout, std::cerr);
}
