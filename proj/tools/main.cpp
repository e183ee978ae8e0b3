#include <iostream>

#include "edit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return edit::run_cli(args, std::cout, std::cerr);
}
