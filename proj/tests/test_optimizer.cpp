#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "strk/optimizer.hpp"

using namespace strk;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("first sd_amsgrad step moves by -eta * sign(g)") {
  OptimizerHyper hyper;
  hyper.eta = 0.05;
  hyper.epsilon = 1e-16;  // epsilon -> 0 limit
  Eigen::VectorXd theta = vec({1.0, -2.0, 3.0});
  OptimizerState state = OptimizerState::zeros(3);
  const Eigen::VectorXd g = vec({0.3, -0.7, 1.2});
  sd_amsgrad_step(theta, g, state, hyper);
  CHECK(theta[0] == doctest::Approx(1.0 - 0.05).epsilon(1e-9));
  CHECK(theta[1] == doctest::Approx(-2.0 + 0.05).epsilon(1e-9));
  CHECK(theta[2] == doctest::Approx(3.0 - 0.05).epsilon(1e-9));
}

TEST_CASE("adam first step is also -eta * sign(g)") {
  OptimizerHyper hyper;
  hyper.eta = 0.1;
  hyper.epsilon = 1e-16;
  Eigen::VectorXd theta = vec({0.0, 0.0});
  OptimizerState state = OptimizerState::zeros(2);
  adam_step(theta, vec({2.0, -0.001}), state, hyper);
  CHECK(theta[0] == doctest::Approx(-0.1).epsilon(1e-9));
  CHECK(theta[1] == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("zero gradients never move parameters") {
  OptimizerHyper hyper;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  for (const OptimizerKind kind : {OptimizerKind::SdAmsGrad, OptimizerKind::AmsGrad,
                                   OptimizerKind::Adam, OptimizerKind::SdMomentum}) {
    Eigen::VectorXd theta = vec({1.0, -1.0, 0.5, 2.0});
    const Eigen::VectorXd original = theta;
    OptimizerState state = OptimizerState::zeros(4);
    for (int i = 0; i < 10; ++i) optimizer_step(kind, theta, zero, state, hyper);
    CHECK(theta == original);
  }
}

TEST_CASE("sd_amsgrad trajectory matches the scripted reference") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> dist(0.0, 1.0);
  const Eigen::Index dim = 6;
  std::vector<Eigen::VectorXd> grads;
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd g(dim);
    for (Eigen::Index j = 0; j < dim; ++j) g[j] = dist(rng);
    grads.push_back(g);
  }
  OptimizerHyper hyper;
  hyper.eta = 0.01;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
  OptimizerState state = OptimizerState::zeros(dim);
  const auto reference = oracle::sd_amsgrad_trajectory(
      theta, grads, hyper.eta, hyper.beta1, hyper.beta2, hyper.beta3, hyper.epsilon);
  for (size_t i = 0; i < grads.size(); ++i) {
    sd_amsgrad_step(theta, grads[i], state, hyper);
    CHECK((theta - reference[i]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("alternating gradient signs shrink the sign average toward (1-b)/(1+b)") {
  OptimizerHyper hyper;
  hyper.eta = 0.01;
  Eigen::VectorXd theta = vec({0.0});
  Eigen::VectorXd theta_ams = vec({0.0});
  OptimizerState sd = OptimizerState::zeros(1);
  OptimizerState ams = OptimizerState::zeros(1);
  double last_sd_move = 0.0, last_ams_move = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd g = vec({i % 2 == 0 ? 1.0 : -1.0});
    const double before_sd = theta[0], before_ams = theta_ams[0];
    sd_amsgrad_step(theta, g, sd, hyper);
    amsgrad_step(theta_ams, g, ams, hyper);
    last_sd_move = std::abs(theta[0] - before_sd);
    last_ams_move = std::abs(theta_ams[0] - before_ams);
  }
  const double s_limit = (1.0 - hyper.beta3) / (1.0 + hyper.beta3);
  CHECK(std::abs(sd.s[0]) == doctest::Approx(s_limit).epsilon(1e-3));
  // Update magnitude damped by roughly s^2 relative to AMSGrad.
  CHECK(last_sd_move / last_ams_move == doctest::Approx(s_limit * s_limit).epsilon(0.05));
}

TEST_CASE("sd_amsgrad equals amsgrad when the sign damping is forced to one") {
  // Constant-sign gradients drive s_hat to exactly 1 after bias correction.
  OptimizerHyper hyper;
  hyper.eta = 0.02;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> mag(0.1, 2.0);
  Eigen::VectorXd a = vec({1.0, -1.0, 0.0}), b = a;
  OptimizerState sa = OptimizerState::zeros(3), sb = OptimizerState::zeros(3);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd g = vec({mag(rng), mag(rng), mag(rng)});
    sd_amsgrad_step(a, g, sa, hyper);
    amsgrad_step(b, g, sb, hyper);
    for (int j = 0; j < 3; ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
  }
}

TEST_CASE("v_max keeps denominators from shrinking, unlike adam") {
  OptimizerHyper hyper;
  hyper.eta = 0.1;
  Eigen::VectorXd t_ams = vec({0.0}), t_adam = vec({0.0});
  OptimizerState s_ams = OptimizerState::zeros(1), s_adam = OptimizerState::zeros(1);
  // A large gradient followed by tiny ones: amsgrad's denominator stays at
  // the max, adam's decays, so adam keeps taking larger steps.
  amsgrad_step(t_ams, vec({10.0}), s_ams, hyper);
  adam_step(t_adam, vec({10.0}), s_adam, hyper);
  double v_max_prev = s_ams.v_max[0];
  for (int i = 0; i < 20; ++i) {
    const double before_ams = t_ams[0], before_adam = t_adam[0];
    amsgrad_step(t_ams, vec({0.01}), s_ams, hyper);
    adam_step(t_adam, vec({0.01}), s_adam, hyper);
    CHECK(s_ams.v_max[0] >= s_ams.v[0]);
    CHECK(s_ams.v_max[0] <= v_max_prev + 1e-18);  // nondecreasing denominator base
    v_max_prev = s_ams.v_max[0];
    CHECK(std::abs(t_adam[0] - before_adam) > std::abs(t_ams[0] - before_ams));
  }
}

TEST_CASE("updates scale linearly with eta") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<Eigen::VectorXd> grads;
  for (int i = 0; i < 20; ++i) grads.push_back(vec({dist(rng), dist(rng)}));
  for (const OptimizerKind kind : {OptimizerKind::SdAmsGrad, OptimizerKind::AmsGrad,
                                   OptimizerKind::Adam, OptimizerKind::SdMomentum}) {
    OptimizerHyper h1, h2;
    h1.eta = 0.01;
    h2.eta = 0.03;
    Eigen::VectorXd ta = vec({0.0, 0.0}), tb = vec({0.0, 0.0});
    OptimizerState sa = OptimizerState::zeros(2), sb = OptimizerState::zeros(2);
    for (const auto& g : grads) {
      const Eigen::VectorXd before_a = ta, before_b = tb;
      optimizer_step(kind, ta, g, sa, h1);
      optimizer_step(kind, tb, g, sb, h2);
      const Eigen::VectorXd da = ta - before_a, db = tb - before_b;
      // Moment states do not depend on eta, so per-step updates scale by 3.
      CHECK((db - 3.0 * da).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("non-finite gradient reports the component index") {
  OptimizerHyper hyper;
  Eigen::VectorXd theta = vec({0.0, 0.0, 0.0});
  OptimizerState state = OptimizerState::zeros(3);
  Eigen::VectorXd g = vec({0.0, std::nan(""), 0.0});
  try {
    sd_amsgrad_step(theta, g, state, hyper);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.step_index == 1);
  }
}

TEST_CASE("step size decay follows the log ratio of the best error") {
  const double eta0 = 0.1;
  SUBCASE("unchanged error keeps eta") {
    CHECK(step_size_decay(eta0, eta0, 5.0, 5.0) == doctest::Approx(eta0).epsilon(1e-12));
  }
  SUBCASE("vanishing error sends eta to zero") {
    CHECK(step_size_decay(eta0, eta0, 0.0, 5.0) == 0.0);
  }
  SUBCASE("log ratio hits exactly one half") {
    const double err0 = std::exp(2.0) - 1.0;
    const double err = std::exp(1.0) - 1.0;
    CHECK(step_size_decay(eta0, eta0, err, err0) == doctest::Approx(eta0 / 2).epsilon(1e-12));
  }
  SUBCASE("monotone nonincreasing along a run") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    const double err0 = 8.0;
    double eta = eta0, err_min = err0;
    for (int i = 0; i < 200; ++i) {
      err_min = std::min(err_min, u(rng));
      const double next = step_size_decay(eta, eta0, err_min, err0);
      CHECK(next <= eta + 1e-15);
      eta = next;
    }
  }
  SUBCASE("nonpositive initial error is rejected") {
    CHECK_THROWS_AS(step_size_decay(eta0, eta0, 1.0, 0.0), InvalidInputError);
  }
}
