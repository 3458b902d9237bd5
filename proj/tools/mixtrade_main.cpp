#include <string>
#include <vector>

#include "mixtrade/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mixtrade::run_cli(args);
}
