#include <iostream>
#include <string>
#include <vector>

#include "taxogate/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return taxogate::run_command(args, std::cout, std::cerr);
}
