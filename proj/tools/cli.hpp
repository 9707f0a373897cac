#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace orthoai::cli {

enum ExitCode { kOk = 0, kDomainError = 1, kUsageError = 2 };

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace orthoai::cli
