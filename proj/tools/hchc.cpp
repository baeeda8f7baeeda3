#include <iostream>
#include <string>
#include <vector>

#include "hchc/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return hchc::cli::main(args, std::cout, std::cerr);
}
