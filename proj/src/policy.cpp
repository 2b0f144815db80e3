#include "blno/policy.hpp"

#include <cmath>

#include "blno/error.hpp"

namespace blno {

FeatureMap::FeatureMap(Kind kind, int state_dim)
    : kind_(kind), state_dim_(state_dim) {
  dim_ = kind == Kind::kOneHot
             ? state_dim
             : state_dim + state_dim * (state_dim + 1) / 2 + 1;
}

VectorXd FeatureMap::operator()(const Eigen::Ref<const VectorXd>& state) const {
  if (kind_ == Kind::kOneHot) {
    VectorXd phi = VectorXd::Zero(dim_);
    const int idx = static_cast<int>(state[0]);
    if (idx < 0 || idx >= dim_) {
      throw NumericError("feature map: one-hot index out of range");
    }
    phi[idx] = 1.0;
    return phi;
  }
  VectorXd phi(dim_);
  Eigen::Index at = 0;
  phi.segment(at, state_dim_) = state;
  at += state_dim_;
  for (int i = 0; i < state_dim_; ++i)
    for (int j = i; j < state_dim_; ++j) phi[at++] = state[i] * state[j];
  phi[at] = 1.0;
  return phi;
}

SoftmaxPolicy SoftmaxPolicy::zeros(int action_count, int feature_dim) {
  SoftmaxPolicy p;
  p.action_count = action_count;
  p.feature_dim = feature_dim;
  p.theta = VectorXd::Zero(action_count * feature_dim);
  return p;
}

VectorXd SoftmaxPolicy::probs(const Eigen::Ref<const VectorXd>& phi) const {
  VectorXd logits(action_count);
  for (int a = 0; a < action_count; ++a) {
    logits[a] = theta.segment(a * feature_dim, feature_dim).dot(phi);
  }
  const double shift = logits.maxCoeff();
  VectorXd expd = (logits.array() - shift).exp();
  return expd / expd.sum();
}

double SoftmaxPolicy::log_prob(const Eigen::Ref<const VectorXd>& phi,
                               int action) const {
  return std::log(probs(phi)[action]);
}

VectorXd SoftmaxPolicy::grad_log_prob(const Eigen::Ref<const VectorXd>& phi,
                                      int action) const {
  const VectorXd pi = probs(phi);
  VectorXd grad(theta.size());
  for (int a = 0; a < action_count; ++a) {
    const double coeff = (a == action ? 1.0 : 0.0) - pi[a];
    grad.segment(a * feature_dim, feature_dim) = coeff * phi;
  }
  return grad;
}

int SoftmaxPolicy::sample(const Eigen::Ref<const VectorXd>& phi,
                          Rng& rng) const {
  const VectorXd pi = probs(phi);
  double u = rng.uniform();
  for (int a = 0; a < action_count; ++a) {
    u -= pi[a];
    if (u <= 0.0) return a;
  }
  return action_count - 1;
}

int SoftmaxPolicy::argmax(const Eigen::Ref<const VectorXd>& phi) const {
  int best = 0;
  probs(phi).maxCoeff(&best);
  return best;
}

LinearCritic LinearCritic::zeros(int feature_dim) {
  LinearCritic c;
  c.omega = VectorXd::Zero(feature_dim);
  return c;
}

ObsNormalizer::ObsNormalizer(int state_dim, bool enabled)
    : enabled_(enabled),
      mean_(VectorXd::Zero(state_dim)),
      m2_(VectorXd::Zero(state_dim)) {}

void ObsNormalizer::observe(const Eigen::Ref<const VectorXd>& state) {
  if (!enabled_) return;
  count_ += 1.0;
  const VectorXd delta = state - mean_;
  mean_ += delta / count_;
  m2_ += delta.cwiseProduct(state - mean_);
}

VectorXd ObsNormalizer::normalize(const Eigen::Ref<const VectorXd>& state) const {
  if (!enabled_ || count_ < 2.0) return state;
  const VectorXd var = m2_ / count_;
  return (state - mean_).cwiseQuotient((var.array() + 1e-8).sqrt().matrix());
}

}  // namespace blno
