// SPDX-License-Identifier: Apache-2.0

#include "rrcl/commands.hpp"

int main(int argc, char** argv) { return rrcl::cli_main(argc, argv); }
