#include <iostream>

#include "pfguard/cli.h"

int main(int argc, char** argv) {
  return pfguard::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
