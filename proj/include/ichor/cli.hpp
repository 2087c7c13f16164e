// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace ichor {

/// Full command-line surface; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace ichor
