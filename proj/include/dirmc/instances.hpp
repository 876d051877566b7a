#pragma once

// Synthetic LDA instances: interior maximizers from exact mixtures, boundary
// maximizers with planted KKT multipliers, and topic matrices with a
// prescribed epsilon-sparsity.

#include <cstdint>
#include <map>

#include "dirmc/objectives.hpp"
#include "dirmc/simplex.hpp"

namespace dirmc {

struct GeneratorConfig {
  std::size_t K = 5;
  std::size_t V = 1000;
  double phiPrior = 0.1;
  std::size_t m = 0;
  double lambdaMin = 0.2;
  double lambdaMax = 1.0;
  int maxRetries = 1000;
  std::uint64_t seed = 0;
  double n = 1000.0;  // document length carried by the instance

  void validate() const;
};

// K rows drawn Dir(beta 1_V), regenerated until phi phi^T is well conditioned.
TopicMatrix sampleTopicMatrix(std::size_t k, std::size_t v, double beta, RandomStream& stream, int maxRetries);

// p = theta_true^T phi with theta_true ~ Dir(1_K), so theta* = theta_true.
LdaInstance genInteriorInstance(const GeneratorConfig& cfg, RandomStream& stream);
// Same construction with a caller-supplied topic matrix.
LdaInstance interiorInstanceFor(const TopicMatrix& phi, double n, RandomStream& stream);

// theta* zero on the first m coordinates, gradient 1 on the support and
// 1 - lambda_k (lambda_k ~ U(lambdaMin, lambdaMax)) on the active set; p from
// the non-negative minimum-norm correction of w0 = 1/V.
LdaInstance genBoundaryInstance(const GeneratorConfig& cfg, RandomStream& stream);

// Interior when cfg.m == 0, boundary otherwise; stream (cfg.seed, 0).
LdaInstance generateInstance(const GeneratorConfig& cfg);

// Word v is owned by topic v mod K. Topic k puts (1 - eta) of its mass on its
// own words (Dir(1) within the block) and eta on the rest, calibrated so that
// the largest off-dominant to dominant ratio equals targetEpsilon exactly.
TopicMatrix genSparsityControlledPhi(std::size_t k, std::size_t v, double targetEpsilon, RandomStream& stream);

struct CorpusDocument {
  std::map<std::size_t, double> counts;  // word index -> count
  double n = 0.0;                         // total count

  void validate() const;
};

// Bag of words of length n drawn from the LDA generative model with fixed theta.
CorpusDocument sampleDocument(const TopicMatrix& phi, const SimplexPoint& theta, std::size_t n, RandomStream& stream);

// p_v = count_v / n.
LdaInstance toLdaInstance(const TopicMatrix& phi, const CorpusDocument& doc);

}  // namespace dirmc
