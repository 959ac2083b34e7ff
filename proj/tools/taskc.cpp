#include <iostream>

#include "taskc/cli/cli.hpp"

int main(int argc, char** argv) {
    return taskc::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
