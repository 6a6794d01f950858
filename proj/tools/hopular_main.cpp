#include <string>
#include <vector>

#include "hopular/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return hopular::run_cli(args);
}
