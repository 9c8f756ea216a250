#include <iostream>

#include "bagopf/cli.hpp"

int main(int argc, char** argv) {
  return bagopf::run_cli(argc, argv, std::cout, std::cerr);
}
