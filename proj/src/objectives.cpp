#include "dirmc/objectives.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "dirmc/error.hpp"

namespace dirmc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double evaluate(const Objective& objective, const SimplexPoint& theta) {
  std::vector<double> logs(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) logs[i] = theta[i] > 0.0 ? std::log(theta[i]) : -kInf;
  return objective.value(theta.coords(), logs);
}

// ---------------------------------------------------------------------------

TopicMatrix::TopicMatrix(const Eigen::MatrixXd& phi) : phi_(phi) {
  if (phi_.rows() == 0 || phi_.cols() == 0) throw ValidationError("topic matrix must be non-empty");
  for (Eigen::Index k = 0; k < phi_.rows(); ++k) {
    std::vector<double> row(phi_.cols());
    for (Eigen::Index v = 0; v < phi_.cols(); ++v) row[v] = phi_(k, v);
    SimplexPoint checked(std::move(row));
    for (Eigen::Index v = 0; v < phi_.cols(); ++v) phi_(k, v) = checked[v];
  }
}

TopicMatrix TopicMatrix::fromRows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ValidationError("topic matrix must have at least one row");
  const std::size_t v = rows.front().size();
  Eigen::MatrixXd m(rows.size(), v);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != v) throw ValidationError("topic matrix rows have inconsistent lengths");
    for (std::size_t j = 0; j < v; ++j) m(k, j) = rows[k][j];
  }
  return TopicMatrix(m);
}

// ---------------------------------------------------------------------------

LdaInstance::LdaInstance(TopicMatrix phi, SimplexPoint p, double n, std::optional<KnownMaximizer> known)
    : phi_(std::move(phi)), p_(std::move(p)), n_(n), known_(std::move(known)) {
  if (p_.size() != phi_.vocabSize()) {
    std::ostringstream os;
    os << "word-frequency vector has length " << p_.size() << " but the topic matrix has V=" << phi_.vocabSize();
    throw ValidationError(os.str());
  }
  if (!(n_ >= 0.0) || !std::isfinite(n_)) throw ValidationError("document length must be non-negative");
  const auto& m = phi_.matrix();
  for (std::size_t v = 0; v < p_.size(); ++v) {
    if (p_[v] <= 0.0) continue;
    if (!(m.col(static_cast<Eigen::Index>(v)).maxCoeff() > 0.0)) {
      std::ostringstream os;
      os << "word " << v << " has positive frequency but zero probability under every topic";
      throw ValidationError(os.str());
    }
    activeWords_.push_back(v);
  }
  const auto k = static_cast<Eigen::Index>(phi_.numTopics());
  activePhi_.resize(k, static_cast<Eigen::Index>(activeWords_.size()));
  activeP_.resize(static_cast<Eigen::Index>(activeWords_.size()));
  for (std::size_t j = 0; j < activeWords_.size(); ++j) {
    activePhi_.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(activeWords_[j]));
    activeP_(static_cast<Eigen::Index>(j)) = p_[activeWords_[j]];
  }
  activePhiT_ = activePhi_.transpose();
  if (known_) {
    if (known_->thetaStar.size() != phi_.numTopics()) throw ValidationError("known maximizer has wrong dimension");
    if (known_->lambda.size() != known_->activeSet.size())
      throw ValidationError("known KKT multipliers must align with the active set");
  }
}

ObjectiveEval ldaEvaluate(const LdaInstance& inst, std::span<const double> theta, bool withGradient,
                          bool withHessian) {
  const auto k = static_cast<Eigen::Index>(inst.numTopics());
  if (static_cast<Eigen::Index>(theta.size()) != k) throw ValidationError("theta has wrong dimension");
  const Eigen::Map<const Eigen::VectorXd> t(theta.data(), k);
  const Eigen::MatrixXd& cols = inst.activeColumns();
  const Eigen::VectorXd& w = inst.activeWeights();
  const Eigen::VectorXd mix = cols.transpose() * t;

  ObjectiveEval out;
  double value = 0.0;
  bool degenerate = false;
  for (Eigen::Index j = 0; j < mix.size(); ++j) {
    if (!(mix(j) > 0.0)) {
      degenerate = true;
      break;
    }
    value += w(j) * std::log(mix(j));
  }
  if (degenerate) {
    out.value = -kInf;
    return out;
  }
  out.value = value;
  if (withGradient || withHessian) {
    const Eigen::VectorXd scaled = w.cwiseQuotient(mix);
    if (withGradient) out.gradient = cols * scaled;
    if (withHessian) {
      const Eigen::VectorXd root = w.cwiseSqrt().cwiseQuotient(mix);
      const Eigen::MatrixXd weighted = cols * root.asDiagonal();
      Eigen::MatrixXd h = -(weighted * weighted.transpose());
      out.hessian = 0.5 * (h + h.transpose());
    }
  }
  return out;
}

double ldaValue(const LdaInstance& inst, const SimplexPoint& theta) {
  return ldaEvaluate(inst, theta.coords(), false, false).value;
}

Eigen::VectorXd ldaGradient(const LdaInstance& inst, const SimplexPoint& theta) {
  auto e = ldaEvaluate(inst, theta.coords(), true, false);
  if (!e.gradient) throw NumericalError("LDA gradient undefined: a mixture probability vanishes");
  return *e.gradient;
}

Eigen::MatrixXd ldaHessian(const LdaInstance& inst, const SimplexPoint& theta) {
  auto e = ldaEvaluate(inst, theta.coords(), false, true);
  if (!e.hessian) throw NumericalError("LDA Hessian undefined: a mixture probability vanishes");
  return *e.hessian;
}

double LdaObjective::value(std::span<const double> theta, std::span<const double>) const {
  const LdaInstance& inst = *inst_;
  const Eigen::Map<const Eigen::VectorXd> t(theta.data(), static_cast<Eigen::Index>(theta.size()));
  thread_local Eigen::VectorXd mix;
  mix.noalias() = inst.activeColumnsTransposed() * t;
  if (mix.size() == 0) return 0.0;
  if (!(mix.minCoeff() > 0.0)) return -kInf;
  return inst.activeWeights().dot(mix.array().log().matrix());
}

// ---------------------------------------------------------------------------

double KlObjective::value(std::span<const double>, std::span<const double> logTheta) const {
  const double kl = klDivergenceFromLogs(thetaStar_, logTheta);
  if (kl == kInf) return -kInf;
  return hAtStar_ - kl;
}

double KlObjective::logExpectation(const DirichletParams& alpha, double n) const {
  if (alpha.size() != thetaStar_.size()) throw ValidationError("alpha has wrong dimension");
  std::vector<double> shifted(alpha.size());
  double entropyTerm = 0.0;  // theta* . log theta*
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    shifted[i] = alpha[i] + n * thetaStar_[i];
    if (thetaStar_[i] > 0.0) entropyTerm += thetaStar_[i] * std::log(thetaStar_[i]);
  }
  return logMultivariateBeta(shifted) - logMultivariateBeta(alpha) + n * (hAtStar_ - entropyTerm);
}

double klObjectiveValue(const KlObjective& obj, const SimplexPoint& theta) { return evaluate(obj, theta); }

Eigen::MatrixXd klObjectiveHessianAtStar(const KlObjective& obj) {
  const auto k = static_cast<Eigen::Index>(obj.dim());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double t = obj.thetaStar()[static_cast<std::size_t>(i)];
    if (t > 0.0) h(i, i) = -1.0 / t;
  }
  return h;
}

}  // namespace dirmc
