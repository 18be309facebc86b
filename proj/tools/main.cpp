#include "ia2u/cli/commands.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return ia2u::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
