#include "dirmc/instances.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "dirmc/error.hpp"

namespace dirmc {

namespace {

constexpr double kMinGramRcond = 1e-12;

bool wellConditioned(const Eigen::MatrixXd& phi) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(phi * phi.transpose());
  return ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > kMinGramRcond;
}

std::vector<double> uniformDirichlet(std::size_t k, RandomStream& stream) {
  return sampleDirichlet(DirichletParams::symmetric(k, 1.0), stream).vec();
}

std::size_t categorical(const std::vector<double>& cumulative, RandomStream& stream) {
  const double u = stream.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

}  // namespace

void GeneratorConfig::validate() const {
  if (K == 0 || V == 0) throw ValidationError("K and V must be positive");
  if (!(phiPrior > 0.0)) throw ValidationError("phi prior must be positive");
  if (m > K - 1) {
    std::ostringstream os;
    os << "m=" << m << " violates m <= K-1 (K=" << K << ")";
    throw ValidationError(os.str());
  }
  if (!(lambdaMin > 0.0 && lambdaMin <= lambdaMax && lambdaMax <= 1.0))
    throw ValidationError("need 0 < lambdaMin <= lambdaMax <= 1");
  if (maxRetries < 1) throw ValidationError("maxRetries must be at least 1");
  if (!(n >= 0.0) || !std::isfinite(n)) throw ValidationError("document length must be non-negative");
}

TopicMatrix sampleTopicMatrix(std::size_t k, std::size_t v, double beta, RandomStream& stream, int maxRetries) {
  const auto params = DirichletParams::symmetric(v, beta);
  for (int attempt = 0; attempt < maxRetries; ++attempt) {
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v));
    for (std::size_t r = 0; r < k; ++r) {
      const auto row = sampleDirichlet(params, stream);
      for (std::size_t j = 0; j < v; ++j) phi(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = row[j];
    }
    if (wellConditioned(phi)) return TopicMatrix(phi);
  }
  throw GenerationError("could not draw a full-rank topic matrix within the retry budget");
}

LdaInstance interiorInstanceFor(const TopicMatrix& phi, double n, RandomStream& stream) {
  const std::size_t k = phi.numTopics();
  SimplexPoint theta = sampleDirichlet(DirichletParams::symmetric(k, 1.0), stream);
  const Eigen::Map<const Eigen::VectorXd> t(theta.vec().data(), static_cast<Eigen::Index>(k));
  const Eigen::VectorXd mix = phi.matrix().transpose() * t;
  SimplexPoint p = normalizedFromPositive({mix.data(), mix.data() + mix.size()});
  KnownMaximizer known{theta, {}, {}};
  return LdaInstance(phi, std::move(p), n, std::move(known));
}

LdaInstance genInteriorInstance(const GeneratorConfig& cfg, RandomStream& stream) {
  cfg.validate();
  if (cfg.m != 0) throw ValidationError("interior instances need m = 0");
  const TopicMatrix phi = sampleTopicMatrix(cfg.K, cfg.V, cfg.phiPrior, stream, cfg.maxRetries);
  return interiorInstanceFor(phi, cfg.n, stream);
}

LdaInstance genBoundaryInstance(const GeneratorConfig& cfg, RandomStream& stream) {
  cfg.validate();
  if (cfg.m < 1) throw ValidationError("boundary instances need 1 <= m <= K-1");
  const std::size_t k = cfg.K;
  const std::size_t m = cfg.m;
  const auto kk = static_cast<Eigen::Index>(k);
  const auto vv = static_cast<Eigen::Index>(cfg.V);
  const auto params = DirichletParams::symmetric(cfg.V, cfg.phiPrior);

  for (int attempt = 0; attempt < cfg.maxRetries; ++attempt) {
    Eigen::MatrixXd phi(kk, vv);
    for (Eigen::Index r = 0; r < kk; ++r) {
      const auto row = sampleDirichlet(params, stream);
      for (Eigen::Index j = 0; j < vv; ++j) phi(r, j) = row[static_cast<std::size_t>(j)];
    }

    std::vector<double> theta(k, 0.0);
    const auto inactive = uniformDirichlet(k - m, stream);
    for (std::size_t i = m; i < k; ++i) theta[i] = inactive[i - m];

    std::vector<double> lambda(m);
    Eigen::VectorXd b = Eigen::VectorXd::Ones(kk);
    for (std::size_t i = 0; i < m; ++i) {
      lambda[i] = cfg.lambdaMin + (cfg.lambdaMax - cfg.lambdaMin) * stream.uniform();
      b(static_cast<Eigen::Index>(i)) = 1.0 - lambda[i];
    }

    // The normalization row s^T w = 1 of the augmented system equals
    // theta*^T (phi w) = theta*^T b = 1, so it is implied by phi w = b and the
    // minimum-norm correction only needs the K x K Gram matrix.
    Eigen::LDLT<Eigen::MatrixXd> gram(phi * phi.transpose());
    if (gram.info() != Eigen::Success || !gram.isPositive() || gram.rcond() < kMinGramRcond) continue;
    const Eigen::VectorXd w0 = Eigen::VectorXd::Constant(vv, 1.0 / static_cast<double>(cfg.V));
    const Eigen::VectorXd w = w0 + phi.transpose() * gram.solve(b - phi * w0);
    if (w.minCoeff() < 0.0) continue;

    const Eigen::Map<const Eigen::VectorXd> t(theta.data(), kk);
    const Eigen::VectorXd s = phi.transpose() * t;
    Eigen::VectorXd p = s.cwiseProduct(w);
    const double total = p.sum();
    if (!(total > 0.0)) continue;
    p /= total;

    KnownMaximizer known;
    known.thetaStar = normalizedFromPositive(theta);
    for (std::size_t i = 0; i < m; ++i) known.activeSet.push_back(i);
    known.lambda = lambda;
    return LdaInstance(TopicMatrix(phi), normalizedFromPositive({p.data(), p.data() + p.size()}), cfg.n,
                       std::move(known));
  }
  std::ostringstream os;
  os << "no non-negative w found in " << cfg.maxRetries << " attempts (K=" << k << ", m=" << m << ", V=" << cfg.V
     << ")";
  throw GenerationError(os.str());
}

LdaInstance generateInstance(const GeneratorConfig& cfg) {
  cfg.validate();
  RandomStream stream(cfg.seed, 0);
  return cfg.m == 0 ? genInteriorInstance(cfg, stream) : genBoundaryInstance(cfg, stream);
}

TopicMatrix genSparsityControlledPhi(std::size_t k, std::size_t v, double targetEpsilon, RandomStream& stream) {
  if (k < 2) throw ValidationError("sparsity-controlled topics need K >= 2");
  if (v < k) throw ValidationError("sparsity-controlled topics need V >= K");
  if (!(targetEpsilon >= 0.0) || !std::isfinite(targetEpsilon))
    throw ValidationError("target epsilon must be finite and non-negative");
  if (!(targetEpsilon < static_cast<double>(k - 1))) {
    std::ostringstream os;
    os << "target epsilon " << targetEpsilon << " is infeasible: dominance of the owning topic needs epsilon < K-1 = "
       << (k - 1);
    throw ValidationError(os.str());
  }

  // own[v]: share of word v within its owner's block; off[v]: share within the
  // owner's block of the mass that the other topics place on it.
  std::vector<double> own(v), off(v);
  for (std::size_t topic = 0; topic < k; ++topic) {
    std::vector<std::size_t> words;
    for (std::size_t w = topic; w < v; w += k) words.push_back(w);
    const auto a = uniformDirichlet(words.size(), stream);
    const auto g = uniformDirichlet(words.size(), stream);
    for (std::size_t j = 0; j < words.size(); ++j) {
      own[words[j]] = a[j];
      off[words[j]] = g[j];
    }
  }
  double maxRatio = 0.0;
  for (std::size_t w = 0; w < v; ++w) maxRatio = std::max(maxRatio, off[w] / own[w]);
  // ratio_v = t * off_v / own_v with t = eta / (1 - eta)
  const double t = targetEpsilon / maxRatio;
  const double eta = t / (1.0 + t);

  Eigen::MatrixXd phi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v));
  for (std::size_t topic = 0; topic < k; ++topic)
    for (std::size_t w = 0; w < v; ++w)
      phi(static_cast<Eigen::Index>(topic), static_cast<Eigen::Index>(w)) =
          (w % k == topic) ? (1.0 - eta) * own[w] : eta * off[w] / static_cast<double>(k - 1);
  return TopicMatrix(phi);
}

void CorpusDocument::validate() const {
  double total = 0.0;
  for (const auto& [word, count] : counts) {
    if (!(count >= 0.0) || !std::isfinite(count)) {
      std::ostringstream os;
      os << "negative or non-finite count for word " << word;
      throw ValidationError(os.str());
    }
    total += count;
  }
  if (!(total > 0.0)) throw ValidationError("document has no words");
  if (std::abs(total - n) > 1e-9 * std::max(1.0, n)) throw ValidationError("document length does not match its counts");
}

CorpusDocument sampleDocument(const TopicMatrix& phi, const SimplexPoint& theta, std::size_t n, RandomStream& stream) {
  if (theta.size() != phi.numTopics()) throw ValidationError("theta has wrong dimension");
  if (n == 0) throw ValidationError("document length must be positive");
  std::vector<double> topicCum(theta.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) topicCum[i] = acc += theta[i];
  std::vector<std::vector<double>> wordCum(phi.numTopics(), std::vector<double>(phi.vocabSize()));
  for (std::size_t k = 0; k < phi.numTopics(); ++k) {
    acc = 0.0;
    for (std::size_t w = 0; w < phi.vocabSize(); ++w) wordCum[k][w] = acc += phi(k, w);
  }
  CorpusDocument doc;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t topic = categorical(topicCum, stream);
    doc.counts[categorical(wordCum[topic], stream)] += 1.0;
  }
  doc.n = static_cast<double>(n);
  return doc;
}

LdaInstance toLdaInstance(const TopicMatrix& phi, const CorpusDocument& doc) {
  doc.validate();
  std::vector<double> p(phi.vocabSize(), 0.0);
  for (const auto& [word, count] : doc.counts) {
    if (word >= phi.vocabSize()) {
      std::ostringstream os;
      os << "word index " << word << " is out of range for V=" << phi.vocabSize();
      throw ValidationError(os.str());
    }
    p[word] = count / doc.n;
  }
  return LdaInstance(phi, SimplexPoint(std::move(p)), doc.n);
}

}  // namespace dirmc
