#include <string>
#include <vector>

#include "fire/cli.hpp"

int main(int argc, char** argv) { return fire::cli::run(std::vector<std::string>(argv, argv + argc)); }
