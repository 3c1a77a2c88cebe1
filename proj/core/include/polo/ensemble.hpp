#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polo/approximator.hpp"
#include "polo/core.hpp"
#include "polo/rng.hpp"

namespace polo {

struct EnsembleConfig {
  int members = 6;                  // K
  std::vector<int> hidden = {16, 16};
  double kappa = 0.1;               // optimism temperature, > 0
  double prior_scale = 1.0;         // beta
  double target_noise = 0.01;       // sigma
  double l2_lambda = 1.0;           // lambda
  bool normalized_lse = false;      // divide the aggregate by kappa
  AdamConfig adam;
};

// Randomized-prior value ensemble: K members, each the sum of a frozen
// randomly initialized prior net and a trainable net fit to noise-perturbed
// targets with an L2 penalty of weight sigma^2 / lambda. Member disagreement
// proxies posterior uncertainty; the log-sum-exp aggregate up-weights states
// where members disagree.
class ValueEnsemble {
 public:
  ValueEnsemble(EnsembleConfig cfg, int input_dim, InputScaler scaler,
                std::uint64_t seed);

  int members() const { return static_cast<int>(members_.size()); }
  int input_dim() const { return input_dim_; }

  // prior_k(x) + trainable_k(x) on the scaled input
  double member_value(int k, const Eigen::VectorXd& input) const;

  // log sum_k exp(kappa * member_value(k, input)); computed max-subtracted
  double value(const Eigen::VectorXd& input) const;

  // aggregate of explicitly given member values (same formula)
  double aggregate(std::span<const double> member_values) const;

  // Perturbs each target with fresh N(0, sigma^2) noise from the member's
  // stream and takes one optimizer step on the trainable net against the
  // residual after the frozen prior. Returns the minimized loss: mean squared
  // residual plus the L2 penalty.
  double train_member(int k, std::span<const Eigen::VectorXd> inputs,
                      std::span<const double> targets);

  const DenseNet& prior(int k) const { return members_.at(k).prior; }
  const DenseNet& trainable(int k) const { return members_.at(k).trainable; }
  const EnsembleConfig& config() const { return cfg_; }
  const InputScaler& scaler() const { return scaler_; }

  std::string to_json() const;
  static ValueEnsemble from_json(const std::string& text);

 private:
  struct Member {
    DenseNet prior;
    DenseNet trainable;
    AdamState opt;
    RandomStream noise;
  };

  EnsembleConfig cfg_;
  int input_dim_ = 0;
  InputScaler scaler_;
  std::vector<Member> members_;
};

}  // namespace polo
