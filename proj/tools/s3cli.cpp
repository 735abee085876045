#include <iostream>
#include <string>
#include <vector>

#include "s3/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return s3::cli::run(args, std::cout, std::cerr);
}
