#include <iostream>
#include <string>
#include <vector>

#include "ncmart/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ncmart::run_cli(args, std::cout, std::cerr);
}
