#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "polo/approximator.hpp"
#include "polo/rng.hpp"

using namespace polo;

namespace {

// independent straight-line forward pass over plain vectors, kept free of the
// library's Eigen path on purpose
std::vector<double> reference_forward(const DenseNet& net,
                                      const std::vector<double>& input) {
  std::vector<double> h = input;
  for (int l = 0; l < net.num_layers(); ++l) {
    const int rows = static_cast<int>(net.weights[l].rows());
    const int cols = static_cast<int>(net.weights[l].cols());
    std::vector<double> next(rows, 0.0);
    for (int i = 0; i < rows; ++i) {
      double acc = net.biases[l][i];
      for (int j = 0; j < cols; ++j) acc += net.weights[l](i, j) * h[j];
      next[i] = (l == net.num_layers() - 1) ? acc : std::tanh(acc);
    }
    h = std::move(next);
  }
  return h;
}

double loss_at(const DenseNet& net, const Eigen::VectorXd& x, double target,
               double l2) {
  const double err = net_scalar(net, x) - target;
  double sq = 0.0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    sq += net.weights[l].squaredNorm() + net.biases[l].squaredNorm();
  }
  return err * err + l2 * sq;
}

// central finite difference of the loss with respect to one parameter;
// perturbs in place and restores
double fd_grad(DenseNet& net, double* param, const Eigen::VectorXd& x,
               double target, double l2, double h = 1e-6) {
  const double saved = *param;
  *param = saved + h;
  const double up = loss_at(net, x, target, l2);
  *param = saved - h;
  const double down = loss_at(net, x, target, l2);
  *param = saved;
  return (up - down) / (2.0 * h);
}

DenseNet random_net(RandomStream& rng, std::vector<int> sizes) {
  DenseNet net = net_init(sizes, rng.next_u64(), 1.0);
  // random biases too, so the gradient check exercises them
  for (auto& b : net.biases) {
    for (int i = 0; i < b.size(); ++i) b[i] = rng.uniform(-0.5, 0.5);
  }
  return net;
}

}  // namespace

TEST_CASE("net_init: zero scale gives the zero function") {
  const int sizes[] = {1, 1};
  const DenseNet net = net_init(sizes, 7, 0.0);
  for (double x : {-2.0, 0.0, 1.5}) {
    CHECK(net_scalar(net, Eigen::VectorXd::Constant(1, x)) == 0.0);
  }
}

TEST_CASE("net_init: deterministic in the seed") {
  const int sizes[] = {3, 16, 16, 1};
  const DenseNet a = net_init(sizes, 99);
  const DenseNet b = net_init(sizes, 99);
  const DenseNet c = net_init(sizes, 100);
  bool identical = true;
  bool differs = false;
  for (int l = 0; l < a.num_layers(); ++l) {
    identical = identical && (a.weights[l] == b.weights[l]);
    differs = differs || (a.weights[l] != c.weights[l]);
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("net_init: rejects degenerate shapes") {
  CHECK_THROWS_AS(net_init(std::vector<int>{}, 1), std::invalid_argument);
  CHECK_THROWS_AS(net_init(std::vector<int>{4}, 1), std::invalid_argument);
  CHECK_THROWS_AS(net_init(std::vector<int>{4, 0, 1}, 1), std::invalid_argument);
}

TEST_CASE("net_forward: hand-computed single linear layer") {
  const int sizes[] = {2, 1};
  DenseNet net = net_init(sizes, 0, 0.0);
  net.weights[0](0, 0) = 2.0;
  net.weights[0](0, 1) = -1.0;
  net.biases[0][0] = 0.5;
  Eigen::VectorXd x(2);
  x << 3.0, 4.0;
  CHECK(net_scalar(net, x) == 2.0 * 3.0 - 4.0 + 0.5);
}

TEST_CASE("net_forward: matches an independent implementation") {
  RandomStream rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseNet net = random_net(rng, {4, 16, 16, 1});
    Eigen::VectorXd x(4);
    std::vector<double> xref(4);
    for (int i = 0; i < 4; ++i) {
      x[i] = rng.uniform(-1.0, 1.0);
      xref[i] = x[i];
    }
    const double ours = net_scalar(net, x);
    const double ref = reference_forward(net, xref)[0];
    CHECK(ours == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("net_forward: dimension mismatch is rejected") {
  const int sizes[] = {3, 1};
  const DenseNet net = net_init(sizes, 1);
  CHECK_THROWS_AS(net_forward(net, Eigen::VectorXd::Zero(2)),
                  std::invalid_argument);
}

TEST_CASE("sq_loss_grad: zero loss and zero grads at an exact fit") {
  const int sizes[] = {1, 1};
  DenseNet net = net_init(sizes, 0, 0.0);
  net.weights[0](0, 0) = 1.0;
  const auto [loss, grads] =
      sq_loss_grad(net, Eigen::VectorXd::Constant(1, 2.0), 2.0, 0.0);
  CHECK(loss == 0.0);
  CHECK(grads.weights[0](0, 0) == 0.0);
  CHECK(grads.biases[0][0] == 0.0);
}

TEST_CASE("sq_loss_grad: hand calculus on a one-parameter net") {
  // f(x) = w x with w=3, x=2, target 0: loss (6-0)^2 = 36, dloss/dw = 2*6*2 = 24
  const int sizes[] = {1, 1};
  DenseNet net = net_init(sizes, 0, 0.0);
  net.weights[0](0, 0) = 3.0;
  const auto [loss, grads] =
      sq_loss_grad(net, Eigen::VectorXd::Constant(1, 2.0), 0.0, 0.0);
  CHECK(loss == 36.0);
  CHECK(grads.weights[0](0, 0) == 24.0);
  CHECK(grads.biases[0][0] == 12.0);  // dloss/db = 2*err
}

TEST_CASE("sq_loss_grad: rejects non-finite targets") {
  const int sizes[] = {1, 1};
  const DenseNet net = net_init(sizes, 1);
  CHECK_THROWS_AS(
      sq_loss_grad(net, Eigen::VectorXd::Zero(1), std::nan(""), 0.0),
      std::invalid_argument);
}

TEST_CASE("gradient check: 50 random nets against central differences") {
  RandomStream rng(1234);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<int> sizes =
        trial % 2 ? std::vector<int>{3, 16, 16, 1} : std::vector<int>{2, 8, 1};
    DenseNet net = random_net(rng, sizes);
    Eigen::VectorXd x(sizes.front());
    for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    const double target = rng.uniform(-2.0, 2.0);
    const double l2 = trial % 3 ? 0.0 : 0.01;

    const auto [loss, grads] = sq_loss_grad(net, x, target, l2);
    CHECK(loss >= 0.0);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      for (int i = 0; i < net.weights[l].rows(); ++i) {
        for (int j = 0; j < net.weights[l].cols(); ++j) {
          const double fd = fd_grad(net, &net.weights[l](i, j), x, target, l2);
          const double an = grads.weights[l](i, j);
          const double rel =
              std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
          worst = std::max(worst, rel);
        }
      }
      for (int i = 0; i < net.biases[l].size(); ++i) {
        const double fd = fd_grad(net, &net.biases[l][i], x, target, l2);
        const double an = grads.biases[l][i];
        const double rel =
            std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
        worst = std::max(worst, rel);
      }
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("forward is 1-Lipschitz per parameter at the default init scale") {
  RandomStream rng(55);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const DenseNet net = net_init(std::vector<int>{4, 16, 16, 1},
                                  rng.next_u64(), 1.0);
    for (int probe = 0; probe < 20; ++probe) {
      Eigen::VectorXd x(4);
      for (int i = 0; i < 4; ++i) x[i] = rng.uniform(-1.0, 1.0);
      // gradient of the raw output = half the loss gradient at target f-0.5
      const double out = net_scalar(net, x);
      const auto [loss, grads] = sq_loss_grad(net, x, out - 0.5, 0.0);
      for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        worst = std::max(worst, grads.weights[l].cwiseAbs().maxCoeff());
        worst = std::max(worst, grads.biases[l].cwiseAbs().maxCoeff());
      }
    }
  }
  CHECK(worst <= 1.0);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  const int sizes[] = {2, 4, 1};
  DenseNet net = net_init(sizes, 3);
  const DenseNet before = net;
  AdamState opt = adam_init(net);
  adam_step(opt, net, zero_grads(net));
  for (int l = 0; l < net.num_layers(); ++l) {
    CHECK(net.weights[l] == before.weights[l]);
    CHECK(net.biases[l] == before.biases[l]);
  }
  CHECK(opt.step_count == 1);
}

TEST_CASE("adam: first step moves by about the step size") {
  const int sizes[] = {1, 1};
  DenseNet net = net_init(sizes, 0, 0.0);
  AdamState opt = adam_init(net);
  NetGrads g = zero_grads(net);
  g.weights[0](0, 0) = 0.37;  // any gradient well above epsilon
  g.biases[0][0] = -4.2;
  adam_step(opt, net, g);
  CHECK(std::abs(net.weights[0](0, 0) + opt.cfg.step_size) < 1e-5 * opt.cfg.step_size);
  CHECK(std::abs(net.biases[0][0] - opt.cfg.step_size) < 1e-5 * opt.cfg.step_size);
}

TEST_CASE("adam: shape mismatch is rejected") {
  const int sizes[] = {2, 3, 1};
  DenseNet net = net_init(sizes, 5);
  const int other_sizes[] = {2, 4, 1};
  const DenseNet other = net_init(other_sizes, 5);
  AdamState opt = adam_init(net);
  CHECK_THROWS_AS(adam_step(opt, net, zero_grads(other)), std::invalid_argument);
}

TEST_CASE("adam: converges on a 1-D quadratic") {
  // minimize (w*1 - 3)^2 via the optimizer; the loss trace is its own oracle
  const int sizes[] = {1, 1};
  DenseNet net = net_init(sizes, 0, 0.0);
  AdamConfig cfg;
  cfg.step_size = 0.05;
  AdamState opt = adam_init(net, cfg);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.0);
  std::vector<double> losses;
  for (int i = 0; i < 100; ++i) {
    auto [loss, grads] = sq_loss_grad(net, x, 3.0, 0.0);
    losses.push_back(loss);
    adam_step(opt, net, grads);
  }
  // strictly decreasing from step 5 until the loss first drops three orders
  // of magnitude; momentum then overshoots the optimum and swings back,
  // dipping below 1e-6 of the initial loss along the way
  std::size_t knee = losses.size();
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] < 1e-3 * losses.front()) {
      knee = i;
      break;
    }
  }
  REQUIRE(knee < losses.size());
  for (std::size_t i = 5; i + 1 < knee; ++i) {
    CHECK(losses[i + 1] < losses[i]);
  }
  CHECK(*std::min_element(losses.begin(), losses.end()) <
        1e-6 * losses.front());
}

TEST_CASE("training an over-parameterized net memorizes a fixed batch") {
  RandomStream rng(77);
  DenseNet net = net_init(std::vector<int>{1, 32, 32, 1}, 11, 1.0);
  AdamConfig cfg;
  cfg.step_size = 3e-3;
  AdamState opt = adam_init(net, cfg);
  const int n = 8;
  std::vector<Eigen::VectorXd> xs;
  std::vector<double> ys;
  for (int i = 0; i < n; ++i) {
    xs.push_back(Eigen::VectorXd::Constant(1, -1.0 + 2.0 * i / (n - 1)));
    ys.push_back(rng.uniform(-1.0, 1.0));
  }
  for (int it = 0; it < 12000; ++it) {
    NetGrads grads = zero_grads(net);
    for (int i = 0; i < n; ++i) {
      accumulate_sq_loss_grad(net, xs[i], ys[i], grads);
    }
    grads.scale(1.0 / n);
    adam_step(opt, net, grads);
  }
  double mse = 0.0;
  for (int i = 0; i < n; ++i) {
    const double err = net_scalar(net, xs[i]) - ys[i];
    mse += err * err;
  }
  CHECK(std::sqrt(mse / n) < 1e-3);
}

TEST_CASE("net JSON round-trip preserves parameters exactly") {
  RandomStream rng(13);
  const DenseNet net = random_net(rng, {3, 8, 1});
  const DenseNet back = net_from_json(net_to_json(net));
  REQUIRE(back.sizes == net.sizes);
  for (int l = 0; l < net.num_layers(); ++l) {
    CHECK(back.weights[l] == net.weights[l]);
    CHECK(back.biases[l] == net.biases[l]);
  }
}

TEST_CASE("input scaler maps declared ranges onto [-1, 1]") {
  InputScaler s;
  s.lo = Eigen::VectorXd::Zero(2);
  s.hi = Eigen::VectorXd::Constant(2, 4.0);
  Eigen::VectorXd x(2);
  x << 0.0, 4.0;
  const Eigen::VectorXd y = s(x);
  CHECK(y[0] == -1.0);
  CHECK(y[1] == 1.0);
  // degenerate range maps to 0
  s.hi[0] = s.lo[0];
  CHECK(s(x)[0] == 0.0);
}
