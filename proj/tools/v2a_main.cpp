#include <iostream>

#include "v2a/cli.hpp"

int main(int argc, char** argv) {
  return v2a::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
