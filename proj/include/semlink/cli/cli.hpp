// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace semlink::cli {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kNumeric = 5,
};

/// semlink gen-channels|gen-dataset|train|eval|baseline|sweep; args[0] is
/// the program name. Never throws: errors become a message on `err` and a
/// nonzero status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace semlink::cli
