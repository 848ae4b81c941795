#include <iostream>
#include <string>
#include <vector>

#include "consensus_lab/cli.hpp"

int main(int argc, char** argv) {
  return clab::cli_dispatch(std::vector<std::string>(argv + 1, argv + argc), std::cout,
                            std::cerr);
}
