#include "polo/approximator.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "polo/rng.hpp"

namespace polo {

using nlohmann::json;

int DenseNet::param_count() const {
  int n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<int>(weights[l].size() + biases[l].size());
  }
  return n;
}

DenseNet net_init(std::span<const int> sizes, std::uint64_t seed, double scale) {
  if (sizes.size() < 2) {
    throw std::invalid_argument("net_init: need at least input and output sizes");
  }
  for (int s : sizes) {
    if (s <= 0) throw std::invalid_argument("net_init: layer sizes must be positive");
  }
  DenseNet net;
  net.sizes.assign(sizes.begin(), sizes.end());
  RandomStream rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double bound = scale / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i) {
      for (int j = 0; j < fan_in; ++j) {
        w(i, j) = rng.uniform(-bound, bound);
      }
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

Eigen::VectorXd net_forward(const DenseNet& net, const Eigen::VectorXd& x) {
  if (x.size() != net.input_dim()) {
    throw std::invalid_argument("net_forward: input has dimension " +
                                std::to_string(x.size()) + ", net expects " +
                                std::to_string(net.input_dim()));
  }
  Eigen::VectorXd h = x;
  const int last = net.num_layers() - 1;
  for (int l = 0; l <= last; ++l) {
    h = net.weights[l] * h + net.biases[l];
    if (l != last) h = h.array().tanh().matrix();
  }
  return h;
}

double net_scalar(const DenseNet& net, const Eigen::VectorXd& x) {
  if (net.output_dim() != 1) {
    throw std::invalid_argument("net_scalar: net output is not scalar");
  }
  return net_forward(net, x)[0];
}

void NetGrads::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

void NetGrads::scale(double factor) {
  for (auto& w : weights) w *= factor;
  for (auto& b : biases) b *= factor;
}

NetGrads zero_grads(const DenseNet& net) {
  NetGrads g;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(),
                                              net.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return g;
}

double accumulate_sq_loss_grad(const DenseNet& net, const Eigen::VectorXd& x,
                               double target, NetGrads& acc) {
  if (net.output_dim() != 1) {
    throw std::invalid_argument("sq_loss_grad: net output is not scalar");
  }
  if (!std::isfinite(target)) {
    throw std::invalid_argument("sq_loss_grad: target is not finite");
  }
  if (acc.weights.size() != net.weights.size()) {
    throw std::invalid_argument("sq_loss_grad: gradient shape mismatch");
  }

  const int layers = net.num_layers();
  // forward pass, keeping post-activation outputs per layer
  std::vector<Eigen::VectorXd> activations(layers + 1);
  activations[0] = x;
  for (int l = 0; l < layers; ++l) {
    activations[l + 1] = net.weights[l] * activations[l] + net.biases[l];
    if (l != layers - 1) {
      activations[l + 1] = activations[l + 1].array().tanh().matrix();
    }
  }
  const double err = activations[layers][0] - target;

  // reverse pass; delta = d(loss)/d(pre-activation)
  Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, 2.0 * err);
  for (int l = layers - 1; l >= 0; --l) {
    acc.weights[l].noalias() += delta * activations[l].transpose();
    acc.biases[l] += delta;
    if (l > 0) {
      delta = (net.weights[l].transpose() * delta).cwiseProduct(
          (1.0 - activations[l].array().square()).matrix());
    }
  }
  return err * err;
}

double add_l2_penalty(const DenseNet& net, double weight, NetGrads& acc) {
  if (weight == 0.0) return 0.0;
  double sq = 0.0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    sq += net.weights[l].squaredNorm() + net.biases[l].squaredNorm();
    acc.weights[l] += 2.0 * weight * net.weights[l];
    acc.biases[l] += 2.0 * weight * net.biases[l];
  }
  return weight * sq;
}

std::pair<double, NetGrads> sq_loss_grad(const DenseNet& net,
                                         const Eigen::VectorXd& x,
                                         double target, double l2_weight) {
  NetGrads g = zero_grads(net);
  double loss = accumulate_sq_loss_grad(net, x, target, g);
  loss += add_l2_penalty(net, l2_weight, g);
  return {loss, std::move(g)};
}

AdamState adam_init(const DenseNet& net, AdamConfig cfg) {
  AdamState s;
  s.cfg = cfg;
  s.m = zero_grads(net);
  s.v = zero_grads(net);
  return s;
}

namespace {

void adam_update(Eigen::Ref<Eigen::MatrixXd> param, Eigen::Ref<Eigen::MatrixXd> m,
                 Eigen::Ref<Eigen::MatrixXd> v, const Eigen::MatrixXd& g,
                 const AdamConfig& cfg, double bc1, double bc2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v.array().matrix() + (1.0 - cfg.beta2) * g.array().square().matrix();
  param.array() -= cfg.step_size * (m.array() / bc1) /
                   ((v.array() / bc2).sqrt() + cfg.epsilon);
}

}  // namespace

void adam_step(AdamState& opt, DenseNet& net, const NetGrads& grads) {
  if (grads.weights.size() != net.weights.size()) {
    throw std::invalid_argument("adam_step: gradient shape mismatch");
  }
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    if (grads.weights[l].rows() != net.weights[l].rows() ||
        grads.weights[l].cols() != net.weights[l].cols() ||
        grads.biases[l].size() != net.biases[l].size()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    }
  }
  ++opt.step_count;
  const double bc1 = 1.0 - std::pow(opt.cfg.beta1, opt.step_count);
  const double bc2 = 1.0 - std::pow(opt.cfg.beta2, opt.step_count);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    adam_update(net.weights[l], opt.m.weights[l], opt.v.weights[l],
                grads.weights[l], opt.cfg, bc1, bc2);
    adam_update(net.biases[l], opt.m.biases[l], opt.v.biases[l],
                grads.biases[l], opt.cfg, bc1, bc2);
  }
}

std::string net_to_json(const DenseNet& net) {
  json j;
  j["sizes"] = net.sizes;
  std::vector<double> params;
  params.reserve(net.param_count());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (int i = 0; i < net.weights[l].rows(); ++i) {
      for (int c = 0; c < net.weights[l].cols(); ++c) {
        params.push_back(net.weights[l](i, c));
      }
    }
    for (int i = 0; i < net.biases[l].size(); ++i) {
      params.push_back(net.biases[l][i]);
    }
  }
  j["params"] = params;
  return j.dump();
}

DenseNet net_from_json(const std::string& text) {
  const json j = json::parse(text);
  const std::vector<int> sizes = j.at("sizes").get<std::vector<int>>();
  const std::vector<double> params = j.at("params").get<std::vector<double>>();
  DenseNet net = net_init(sizes, 0, 0.0);
  std::size_t p = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (int i = 0; i < net.weights[l].rows(); ++i) {
      for (int c = 0; c < net.weights[l].cols(); ++c) {
        net.weights[l](i, c) = params.at(p++);
      }
    }
    for (int i = 0; i < net.biases[l].size(); ++i) {
      net.biases[l][i] = params.at(p++);
    }
  }
  if (p != params.size()) {
    throw std::invalid_argument("net_from_json: parameter count mismatch");
  }
  return net;
}

Eigen::VectorXd InputScaler::operator()(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double span = hi[i] - lo[i];
    out[i] = span > 0.0 ? 2.0 * (x[i] - lo[i]) / span - 1.0 : 0.0;
  }
  return out;
}

InputScaler InputScaler::identity(int dim) {
  InputScaler s;
  s.lo = Eigen::VectorXd::Constant(dim, -1.0);
  s.hi = Eigen::VectorXd::Constant(dim, 1.0);
  return s;
}

}  // namespace polo
