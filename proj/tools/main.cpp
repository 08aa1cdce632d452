#include <iostream>

#include "ccf/cli.hpp"

int main(int argc, char** argv) {
  return ccf::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
