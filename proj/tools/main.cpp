#include "ditscale/cli.hpp"

#include <iostream>

int main(int argc, char **argv)
{
  std::vector<std::string> args(argv + 1, argv + argc);
  return ditscale::run_cli(args, std::cout, std::cerr);
}
