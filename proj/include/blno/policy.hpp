#ifndef BLNO_POLICY_HPP_
#define BLNO_POLICY_HPP_

#include "blno/linalg.hpp"
#include "blno/rng.hpp"

namespace blno {

// State featurization shared by the actor and the critic.
//  - kQuadratic: raw state, upper-triangular pairwise products, bias
//    (dimension d + d(d+1)/2 + 1)
//  - kOneHot: indicator of the integer state (state vectors hold the index)
class FeatureMap {
 public:
  enum class Kind { kQuadratic, kOneHot };

  FeatureMap(Kind kind, int state_dim);

  int dim() const { return dim_; }
  Kind kind() const { return kind_; }
  VectorXd operator()(const Eigen::Ref<const VectorXd>& state) const;

 private:
  Kind kind_;
  int state_dim_;
  int dim_;
};

// Discrete softmax policy with per-action parameter blocks:
//   pi(a | s) propto exp(theta_a . phi(s)),  theta_a = theta[a*d .. a*d+d).
struct SoftmaxPolicy {
  int action_count = 0;
  int feature_dim = 0;
  VectorXd theta;

  static SoftmaxPolicy zeros(int action_count, int feature_dim);

  VectorXd probs(const Eigen::Ref<const VectorXd>& phi) const;
  double log_prob(const Eigen::Ref<const VectorXd>& phi, int action) const;
  // d log pi(a|s) / d theta, full length action_count * feature_dim.
  VectorXd grad_log_prob(const Eigen::Ref<const VectorXd>& phi,
                         int action) const;
  int sample(const Eigen::Ref<const VectorXd>& phi, Rng& rng) const;
  int argmax(const Eigen::Ref<const VectorXd>& phi) const;
};

struct LinearCritic {
  VectorXd omega;

  static LinearCritic zeros(int feature_dim);
  double value(const Eigen::Ref<const VectorXd>& phi) const {
    return omega.dot(phi);
  }
};

// Running per-dimension standardization of raw observations (Welford).
// Disabled instances pass states through unchanged.
class ObsNormalizer {
 public:
  ObsNormalizer() = default;
  ObsNormalizer(int state_dim, bool enabled);

  void observe(const Eigen::Ref<const VectorXd>& state);
  VectorXd normalize(const Eigen::Ref<const VectorXd>& state) const;
  bool enabled() const { return enabled_; }

 private:
  bool enabled_ = false;
  double count_ = 0.0;
  VectorXd mean_;
  VectorXd m2_;
};

}  // namespace blno

#endif  // BLNO_POLICY_HPP_
