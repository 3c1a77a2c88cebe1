#include "polo/ensemble.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace polo {

using nlohmann::json;

ValueEnsemble::ValueEnsemble(EnsembleConfig cfg, int input_dim,
                             InputScaler scaler, std::uint64_t seed)
    : cfg_(std::move(cfg)), input_dim_(input_dim), scaler_(std::move(scaler)) {
  if (cfg_.members < 1) {
    throw std::invalid_argument("ValueEnsemble: need at least one member");
  }
  if (cfg_.kappa <= 0.0) {
    throw std::invalid_argument("ValueEnsemble: kappa must be > 0");
  }
  if (cfg_.l2_lambda <= 0.0) {
    throw std::invalid_argument("ValueEnsemble: lambda must be > 0");
  }
  std::vector<int> sizes;
  sizes.push_back(input_dim_);
  sizes.insert(sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  sizes.push_back(1);

  members_.reserve(cfg_.members);
  for (int k = 0; k < cfg_.members; ++k) {
    Member m{
        net_init(sizes, derive_seed(seed, 2 * k), cfg_.prior_scale),
        net_init(sizes, derive_seed(seed, 2 * k + 1), 0.1 * cfg_.prior_scale),
        {},
        RandomStream(derive_seed(seed, 1000 + k)),
    };
    m.opt = adam_init(m.trainable, cfg_.adam);
    members_.push_back(std::move(m));
  }
}

double ValueEnsemble::member_value(int k, const Eigen::VectorXd& input) const {
  const Member& m = members_.at(k);
  const Eigen::VectorXd x = scaler_(input);
  return net_scalar(m.prior, x) + net_scalar(m.trainable, x);
}

double ValueEnsemble::aggregate(std::span<const double> member_values) const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : member_values) m = std::max(m, cfg_.kappa * v);
  double sum = 0.0;
  for (double v : member_values) sum += std::exp(cfg_.kappa * v - m);
  const double lse = m + std::log(sum);
  return cfg_.normalized_lse ? lse / cfg_.kappa : lse;
}

double ValueEnsemble::value(const Eigen::VectorXd& input) const {
  const Eigen::VectorXd x = scaler_(input);
  std::vector<double> vals(members_.size());
  for (std::size_t k = 0; k < members_.size(); ++k) {
    vals[k] = net_scalar(members_[k].prior, x) +
              net_scalar(members_[k].trainable, x);
  }
  return aggregate(vals);
}

double ValueEnsemble::train_member(int k, std::span<const Eigen::VectorXd> inputs,
                                   std::span<const double> targets) {
  if (inputs.empty()) {
    throw std::invalid_argument("train_member: empty batch");
  }
  if (inputs.size() != targets.size()) {
    throw std::invalid_argument("train_member: inputs/targets size mismatch");
  }
  Member& m = members_.at(k);
  NetGrads grads = zero_grads(m.trainable);
  double loss = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!std::isfinite(targets[i])) {
      throw std::invalid_argument("train_member: target is not finite");
    }
    const Eigen::VectorXd x = scaler_(inputs[i]);
    const double noisy = targets[i] + m.noise.normal(0.0, cfg_.target_noise);
    // fit the trainable net to the residual after the frozen prior
    const double residual_target = noisy - net_scalar(m.prior, x);
    loss += accumulate_sq_loss_grad(m.trainable, x, residual_target, grads);
  }
  const double inv_n = 1.0 / static_cast<double>(inputs.size());
  loss *= inv_n;
  grads.scale(inv_n);
  const double penalty_weight =
      cfg_.target_noise * cfg_.target_noise / cfg_.l2_lambda;
  loss += add_l2_penalty(m.trainable, penalty_weight, grads);
  adam_step(m.opt, m.trainable, grads);
  return loss;
}

std::string ValueEnsemble::to_json() const {
  json j;
  j["members"] = cfg_.members;
  j["hidden"] = cfg_.hidden;
  j["kappa"] = cfg_.kappa;
  j["prior_scale"] = cfg_.prior_scale;
  j["target_noise"] = cfg_.target_noise;
  j["l2_lambda"] = cfg_.l2_lambda;
  j["normalized_lse"] = cfg_.normalized_lse;
  j["input_dim"] = input_dim_;
  j["scaler_lo"] = std::vector<double>(scaler_.lo.begin(), scaler_.lo.end());
  j["scaler_hi"] = std::vector<double>(scaler_.hi.begin(), scaler_.hi.end());
  j["nets"] = json::array();
  for (const Member& m : members_) {
    j["nets"].push_back(json{{"prior", json::parse(net_to_json(m.prior))},
                             {"trainable", json::parse(net_to_json(m.trainable))}});
  }
  return j.dump();
}

ValueEnsemble ValueEnsemble::from_json(const std::string& text) {
  const json j = json::parse(text);
  EnsembleConfig cfg;
  cfg.members = j.at("members").get<int>();
  cfg.hidden = j.at("hidden").get<std::vector<int>>();
  cfg.kappa = j.at("kappa").get<double>();
  cfg.prior_scale = j.at("prior_scale").get<double>();
  cfg.target_noise = j.at("target_noise").get<double>();
  cfg.l2_lambda = j.at("l2_lambda").get<double>();
  cfg.normalized_lse = j.at("normalized_lse").get<bool>();
  const int input_dim = j.at("input_dim").get<int>();

  InputScaler scaler;
  const auto lo = j.at("scaler_lo").get<std::vector<double>>();
  const auto hi = j.at("scaler_hi").get<std::vector<double>>();
  scaler.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), lo.size());
  scaler.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), hi.size());

  ValueEnsemble ens(cfg, input_dim, scaler, 0);
  const json& nets = j.at("nets");
  if (static_cast<int>(nets.size()) != cfg.members) {
    throw std::invalid_argument("ensemble checkpoint: member count mismatch");
  }
  for (int k = 0; k < cfg.members; ++k) {
    ens.members_[k].prior = net_from_json(nets[k].at("prior").dump());
    ens.members_[k].trainable = net_from_json(nets[k].at("trainable").dump());
    ens.members_[k].opt = adam_init(ens.members_[k].trainable, cfg.adam);
  }
  return ens;
}

}  // namespace polo
