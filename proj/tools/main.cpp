#include <iostream>
#include <string>
#include <vector>

#include "commands.hpp"

extern char** environ;

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> env;
  for (char** e = environ; *e; ++e) env.emplace_back(*e);
  return rct::cli::run(args, std::cout, std::cerr, env);
}
