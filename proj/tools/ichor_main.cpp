// SPDX-License-Identifier: Apache-2.0

#include "ichor/cli.hpp"

int main(int argc, char** argv) { return ichor::run_cli(argc, argv); }
