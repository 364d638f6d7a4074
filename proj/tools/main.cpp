#include <string>
#include <vector>

#include "docaug/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return docaug::cli::run(args);
}
