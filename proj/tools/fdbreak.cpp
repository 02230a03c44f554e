#include <iostream>
#include <string>
#include <vector>

#include "fdbreak/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return fdbreak::run(args, std::cout, std::cerr);
}
