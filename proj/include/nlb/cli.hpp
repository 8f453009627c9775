#pragma once

#include <stdexcept>
#include <string>

namespace nlb::cli {

// exit codes per the external contract
constexpr int kExitOk = 0;          // all asserted checks pass
constexpr int kExitAssert = 1;      // an assertion failed
constexpr int kExitConfig = 2;      // config parse error
constexpr int kExitPrecondition = 3;  // precondition violation

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Run one experiment config; returns an exit code and writes the report JSON
// and CSV artifacts the config requests. Never throws: errors map to codes.
int run_config(const std::string& path, int jobs = 1);

// Full argv entry point (flags: --jobs, --list-variants, --version).
int run_main(int argc, const char* const* argv);

// KeyEstimateVariant catalog with statement anchors, one per line.
std::string variant_catalog();

}  // namespace nlb::cli
