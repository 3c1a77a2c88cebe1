#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace polo {

// Small dense feedforward net: tanh hidden layers, linear output.
struct DenseNet {
  std::vector<int> sizes;                 // [n_in, h1, ..., n_out]
  std::vector<Eigen::MatrixXd> weights;   // weights[l]: sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases;    // biases[l]: sizes[l+1]

  int input_dim() const { return sizes.front(); }
  int output_dim() const { return sizes.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  int param_count() const;
};

// Weights i.i.d. uniform in +-scale/sqrt(fan_in), biases zero.
DenseNet net_init(std::span<const int> sizes, std::uint64_t seed,
                  double scale = 1.0);

Eigen::VectorXd net_forward(const DenseNet& net, const Eigen::VectorXd& x);

// convenience for scalar-output nets
double net_scalar(const DenseNet& net, const Eigen::VectorXd& x);

// Parameter-shaped gradient buffers.
struct NetGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  void set_zero();
  void scale(double factor);
};

NetGrads zero_grads(const DenseNet& net);

// Adds the gradient of (net(x) - target)^2 into `acc` by reverse
// accumulation; returns the squared error. Scalar-output nets only.
double accumulate_sq_loss_grad(const DenseNet& net, const Eigen::VectorXd& x,
                               double target, NetGrads& acc);

// Adds the gradient of weight * ||params||^2; returns the penalty value.
double add_l2_penalty(const DenseNet& net, double weight, NetGrads& acc);

// Loss and exact gradient of (net(x) - target)^2 + l2_weight * ||params||^2.
std::pair<double, NetGrads> sq_loss_grad(const DenseNet& net,
                                         const Eigen::VectorXd& x,
                                         double target, double l2_weight = 0.0);

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment optimizer state; accumulators mirror the parameter shapes.
struct AdamState {
  AdamConfig cfg;
  long step_count = 0;
  NetGrads m;
  NetGrads v;
};

AdamState adam_init(const DenseNet& net, AdamConfig cfg = {});

// One bias-corrected adaptive-moment update.
void adam_step(AdamState& opt, DenseNet& net, const NetGrads& grads);

// Flat {sizes, params} document; params are laid out layer by layer,
// row-major weights then biases.
std::string net_to_json(const DenseNet& net);
DenseNet net_from_json(const std::string& text);

// Affine per-dimension map onto roughly [-1, 1] given declared ranges.
struct InputScaler {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
  static InputScaler identity(int dim);
};

}  // namespace polo
