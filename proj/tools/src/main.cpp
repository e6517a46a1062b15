#include <iostream>

#include "direcnet_cli/cli.hpp"

int main(int argc, char** argv) {
  return direcnet::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
