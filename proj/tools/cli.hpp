#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace onboard::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kIo = 3,
    kValidation = 4,
};

inline constexpr unsigned long long kDefaultSeed = 42;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace onboard::cli
