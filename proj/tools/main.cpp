#include "dac/cli.hpp"

int main(int argc, char** argv) { return dac::cli::run(std::vector<std::string>(argv + 1, argv + argc)); }
