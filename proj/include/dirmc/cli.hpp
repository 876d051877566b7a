#pragma once

// The dirmc command line: gen-instance, check-kkt, estimate, experiment,
// eval-corpus. runCli returns the process exit code (0 ok, 2 validation,
// 3 generation or convergence, 4 numerical) instead of exiting, so tests can
// drive it in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace dirmc {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr const char* kSeedEnvVar = "DIRMC_SEED";

int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dirmc
