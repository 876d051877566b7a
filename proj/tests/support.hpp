#pragma once

#include <cmath>
#include <memory>

#include "dirmc/instances.hpp"
#include "dirmc/objectives.hpp"

namespace dirmc::testing {

inline std::shared_ptr<const LdaInstance> planted(std::size_t k, std::size_t v, std::size_t m, std::uint64_t seed,
                                                  double beta = 0.1, double n = 1000.0) {
  GeneratorConfig cfg;
  cfg.K = k;
  cfg.V = v;
  cfg.m = m;
  cfg.seed = seed;
  cfg.phiPrior = beta;
  cfg.n = n;
  return std::make_shared<const LdaInstance>(generateInstance(cfg));
}

inline double relErr(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace dirmc::testing
