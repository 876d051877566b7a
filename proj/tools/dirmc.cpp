#include <iostream>
#include <string>
#include <vector>

#include "dirmc/cli.hpp"

int main(int argc, char** argv) {
  return dirmc::runCli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
