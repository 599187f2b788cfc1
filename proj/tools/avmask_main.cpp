// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "avmask/cli/cli.hpp"

int main(int argc, char** argv) { return avmask::cli::run_cli(argc, argv, std::cout, std::cerr); }
