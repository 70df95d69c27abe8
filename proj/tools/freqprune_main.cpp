#include <vector>

#include "freqprune/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return freqprune::cli::run(args);
}
