#include <string>
#include <vector>

#include "trajdebug/cli/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return trajdbg::cli::run(std::move(args));
}
