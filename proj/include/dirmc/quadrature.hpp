#pragma once

// Deterministic reference values of E_{Dir(alpha)}[exp(m n H)] for K <= 3 by
// composite Gauss-Jacobi quadrature on the projected simplex. Panels are
// graded geometrically around the peak of the integrand; panels touching an
// edge of the unit interval absorb the Dirichlet factor y^(a-1) (1-y)^(b-1)
// into the Jacobi weight.

#include <optional>
#include <vector>

#include "dirmc/objectives.hpp"
#include "dirmc/simplex.hpp"

namespace dirmc {

struct GaussRule {
  std::vector<double> nodes;       // on [-1, 1]
  std::vector<double> logWeights;
};

// Gauss-Jacobi rule for the weight (1-x)^a (1+x)^b, a, b > -1 (Golub-Welsch).
GaussRule gaussJacobi(std::size_t points, double a, double b);

struct QuadratureOptions {
  std::size_t nodes = 64;          // per panel; the refinement uses 2 * nodes
  double tolerance = 1e-8;         // on the log value
  std::optional<SimplexPoint> peak;  // maximizer of H; located by grid search when absent
};

struct QuadratureResult {
  double logValue = 0.0;
  double errorEstimate = 0.0;      // |log value(2 nodes) - log value(nodes)|
  bool converged = false;
  std::size_t panelsPerAxis = 0;
};

// log E_{Dir(alpha)}[exp(multiplier * n * H)], multiplier in {1, 2}.
QuadratureResult quadratureReference(const Objective& objective, const DirichletParams& alpha, double n,
                                     int multiplier, const QuadratureOptions& options = {});

}  // namespace dirmc
