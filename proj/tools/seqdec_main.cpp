#include <iostream>

#include "seqdec/cli.h"

int main(int argc, char** argv) {
  return seqdec::run_cli(argc, argv, std::cout, std::cerr);
}
