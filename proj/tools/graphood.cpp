#include <iostream>

#include "graphood/cli.hpp"

int main(int argc, char** argv) {
  graphood::configure_logging();
  return graphood::cli_dispatch(argc, argv, std::cout, std::cerr);
}
