#include <iostream>

#include "blockcirc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return blockcirc::cli::run(args, std::cout, std::cerr);
}
