#pragma once

// Objective functions H whose exponentiated Dirichlet expectations are
// estimated: the LDA held-out log-likelihood and the KL surrogate
// Hhat(theta) = H(theta*) - KL(theta* | theta).

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dirmc/simplex.hpp"

namespace dirmc {

// Generic objective on the simplex. Implementations receive both the
// coordinates and their logarithms (-inf for exact zeros) so that
// log-structured objectives stay accurate near faces.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> theta, std::span<const double> logTheta) const = 0;
};

double evaluate(const Objective& objective, const SimplexPoint& theta);

// K x V row-stochastic topic-word matrix.
class TopicMatrix {
 public:
  TopicMatrix() = default;
  // Rows are validated as simplex points (renormalized within 1e-9).
  explicit TopicMatrix(const Eigen::MatrixXd& phi);
  static TopicMatrix fromRows(const std::vector<std::vector<double>>& rows);

  std::size_t numTopics() const { return static_cast<std::size_t>(phi_.rows()); }
  std::size_t vocabSize() const { return static_cast<std::size_t>(phi_.cols()); }
  const Eigen::MatrixXd& matrix() const { return phi_; }
  double operator()(std::size_t k, std::size_t v) const { return phi_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v)); }

 private:
  Eigen::MatrixXd phi_;
};

// Planted or previously computed maximizer information carried with an
// instance (generators and instance bundles).
struct KnownMaximizer {
  SimplexPoint thetaStar;
  std::vector<std::size_t> activeSet;
  std::vector<double> lambda;  // aligned with activeSet
};

class LdaInstance {
 public:
  LdaInstance(TopicMatrix phi, SimplexPoint p, double n, std::optional<KnownMaximizer> known = std::nullopt);

  const TopicMatrix& phi() const { return phi_; }
  const SimplexPoint& p() const { return p_; }
  double n() const { return n_; }
  std::size_t numTopics() const { return phi_.numTopics(); }
  std::size_t vocabSize() const { return phi_.vocabSize(); }
  const std::optional<KnownMaximizer>& known() const { return known_; }

  // Columns phi(v) and weights p_v restricted to words with p_v > 0.
  const Eigen::MatrixXd& activeColumns() const { return activePhi_; }
  const Eigen::VectorXd& activeWeights() const { return activeP_; }
  // Same columns stored |active| x K, so the mixture is a contiguous axpy.
  const Eigen::MatrixXd& activeColumnsTransposed() const { return activePhiT_; }
  std::span<const std::size_t> activeWords() const { return activeWords_; }

 private:
  TopicMatrix phi_;
  SimplexPoint p_;
  double n_;
  std::optional<KnownMaximizer> known_;
  std::vector<std::size_t> activeWords_;
  Eigen::MatrixXd activePhi_;  // K x |active|
  Eigen::MatrixXd activePhiT_;
  Eigen::VectorXd activeP_;
};

struct ObjectiveEval {
  double value = 0.0;
  std::optional<Eigen::VectorXd> gradient;
  std::optional<Eigen::MatrixXd> hessian;
};

// Fused value/gradient/Hessian evaluation sharing the mixture values
// theta^T phi(v). theta may be any vector in R^K (finite-difference probes
// step slightly off the simplex).
ObjectiveEval ldaEvaluate(const LdaInstance& inst, std::span<const double> theta, bool withGradient, bool withHessian);

double ldaValue(const LdaInstance& inst, const SimplexPoint& theta);
Eigen::VectorXd ldaGradient(const LdaInstance& inst, const SimplexPoint& theta);
Eigen::MatrixXd ldaHessian(const LdaInstance& inst, const SimplexPoint& theta);

class LdaObjective final : public Objective {
 public:
  explicit LdaObjective(std::shared_ptr<const LdaInstance> inst) : inst_(std::move(inst)) {}
  std::size_t dim() const override { return inst_->numTopics(); }
  double value(std::span<const double> theta, std::span<const double> logTheta) const override;
  const LdaInstance& instance() const { return *inst_; }

 private:
  std::shared_ptr<const LdaInstance> inst_;
};

// Hhat(theta) = hAtStar - KL(thetaStar | theta).
class KlObjective final : public Objective {
 public:
  KlObjective(SimplexPoint thetaStar, double hAtStar) : thetaStar_(std::move(thetaStar)), hAtStar_(hAtStar) {}
  std::size_t dim() const override { return thetaStar_.size(); }
  double value(std::span<const double> theta, std::span<const double> logTheta) const override;

  const SimplexPoint& thetaStar() const { return thetaStar_; }
  double hAtStar() const { return hAtStar_; }

  // log E_{Dir_alpha}[exp(n Hhat)] = log B(alpha + n theta*) - log B(alpha)
  //                                  + n (hAtStar - theta* . log theta*)
  double logExpectation(const DirichletParams& alpha, double n) const;

 private:
  SimplexPoint thetaStar_;
  double hAtStar_;
};

double klObjectiveValue(const KlObjective& obj, const SimplexPoint& theta);
// Hessian of Hhat at theta*: -diag(1/theta*_i) on the support, zero elsewhere.
Eigen::MatrixXd klObjectiveHessianAtStar(const KlObjective& obj);

class ConstantObjective final : public Objective {
 public:
  ConstantObjective(std::size_t dim, double c) : dim_(dim), c_(c) {}
  std::size_t dim() const override { return dim_; }
  double value(std::span<const double>, std::span<const double>) const override { return c_; }

 private:
  std::size_t dim_;
  double c_;
};

// base(theta) + shift
class ShiftedObjective final : public Objective {
 public:
  ShiftedObjective(const Objective& base, double shift) : base_(base), shift_(shift) {}
  std::size_t dim() const override { return base_.dim(); }
  double value(std::span<const double> theta, std::span<const double> logTheta) const override {
    return base_.value(theta, logTheta) + shift_;
  }

 private:
  const Objective& base_;
  double shift_;
};

class FunctionObjective final : public Objective {
 public:
  using Fn = std::function<double(std::span<const double>, std::span<const double>)>;
  FunctionObjective(std::size_t dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}
  std::size_t dim() const override { return dim_; }
  double value(std::span<const double> theta, std::span<const double> logTheta) const override {
    return fn_(theta, logTheta);
  }

 private:
  std::size_t dim_;
  Fn fn_;
};

}  // namespace dirmc
