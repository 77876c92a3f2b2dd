#include <string>
#include <vector>

#include "dfxcli/commands.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return dfxcli::run_command(args);
}
