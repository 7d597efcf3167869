#include <cmath>

#include "doctest.h"
#include "tdgfn/nn.hpp"
#include "tdgfn/rng.hpp"

using namespace tdgfn;

namespace {

// Loop-nest reimplementation of the forward pass, no Eigen.
std::vector<double> forward_oracle(const MlpSpec& spec,
                                   const Eigen::VectorXd& params,
                                   std::vector<double> x) {
  std::int64_t off = 0;
  for (std::size_t l = 0; l + 1 < spec.layers.size(); ++l) {
    const int in = spec.layers[l];
    const int out = spec.layers[l + 1];
    std::vector<double> z(out, 0.0);
    for (int j = 0; j < in; ++j)
      for (int i = 0; i < out; ++i) z[i] += params[off + j * out + i] * x[j];
    off += std::int64_t(in) * out;
    for (int i = 0; i < out; ++i) z[i] += params[off + i];
    off += out;
    if (l + 2 < spec.layers.size())
      for (double& v : z) v = v > 0.0 ? v : spec.leak * v;
    x = std::move(z);
  }
  return x;
}

// Central finite differences of scalar(params) on a few coordinates.
void check_grad(const Eigen::VectorXd& analytic,
                const std::function<double(const Eigen::VectorXd&)>& f,
                Eigen::VectorXd params, int coords, std::uint64_t seed,
                double tol = 1e-4) {
  Rng rng(seed);
  const double h = 1e-5;
  for (int c = 0; c < coords; ++c) {
    const auto i = rng.below(params.size());
    const double keep = params[i];
    params[i] = keep + h;
    const double up = f(params);
    params[i] = keep - h;
    const double down = f(params);
    params[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    const double scale = std::max({1.0, std::abs(fd), std::abs(analytic[i])});
    CHECK(std::abs(fd - analytic[i]) / scale < tol);
  }
}

}  // namespace

TEST_CASE("forward with zero parameters is zero") {
  Mlp net(MlpSpec{{4, 8, 3}, 0.01}, 1);
  net.params().setZero();
  const Eigen::VectorXd out = net.forward1(Eigen::VectorXd::Random(4));
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity single layer") {
  Mlp net(MlpSpec{{3, 3}, 0.01}, 1);
  net.params().setZero();
  for (int i = 0; i < 3; ++i) net.params()[i * 3 + i] = 1.0;  // W = I
  const Eigen::VectorXd x = Eigen::VectorXd::Random(3);
  CHECK((net.forward1(x) - x).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("forward matches a loop-nest reimplementation") {
  const MlpSpec spec{{5, 7, 7, 3}, 0.01};
  Mlp net(spec, 0);
  Rng rng(42);
  Eigen::VectorXd x(5);
  for (int i = 0; i < 5; ++i) x[i] = rng.uniform01() * 2.0 - 1.0;
  const auto expect =
      forward_oracle(spec, net.params(), {x.data(), x.data() + x.size()});
  const Eigen::VectorXd got = net.forward1(x);
  for (int i = 0; i < 3; ++i)
    CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("dimension mismatch is rejected") {
  Mlp net(MlpSpec{{4, 2}, 0.01}, 1);
  CHECK_THROWS_AS(net.forward1(Eigen::VectorXd::Zero(3)), ContractViolation);
}

TEST_CASE("linear regression gradient closed form") {
  // single linear layer, squared loss (Wx - y)^2
  Mlp net(MlpSpec{{2, 1}, 0.01}, 3);
  const Eigen::VectorXd x = (Eigen::VectorXd(2) << 0.7, -1.3).finished();
  const double y = 0.4;
  Mlp::Cache cache;
  const double pred = net.forward(Eigen::MatrixXd(x), cache)(0, 0);
  const Eigen::VectorXd grad =
      net.backward(cache, Eigen::MatrixXd::Constant(1, 1, 2.0 * (pred - y)));
  CHECK(grad[0] == doctest::Approx(2.0 * (pred - y) * x[0]).epsilon(1e-12));
  CHECK(grad[1] == doctest::Approx(2.0 * (pred - y) * x[1]).epsilon(1e-12));
  CHECK(grad[2] == doctest::Approx(2.0 * (pred - y)).epsilon(1e-12));
}

TEST_CASE("zero output gradient gives zero parameter gradient") {
  Mlp net(MlpSpec{{4, 8, 2}, 0.01}, 5);
  Mlp::Cache cache;
  net.forward(Eigen::MatrixXd::Random(4, 3), cache);
  CHECK(net.backward(cache, Eigen::MatrixXd::Zero(2, 3)).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("backward matches finite differences on repo network shapes") {
  // discriminator-, policy- and flow-shaped networks at several draws
  const std::vector<MlpSpec> shapes = {
      {{11, 256, 256, 1}, 0.01},   // edge classifier over a 4x4 grid
      {{8, 256, 256, 3}, 0.01},    // action policy over a 4x4 grid
      {{8, 256, 256, 3}, 0.01}};   // log-flow head has the same shape
  for (std::size_t shape = 0; shape < shapes.size(); ++shape) {
    for (std::uint64_t draw = 0; draw < 3; ++draw) {
      Mlp net(shapes[shape], 100 * shape + draw);
      const int in = net.input_dim();
      const int out = net.output_dim();
      Rng rng(7 + draw);
      Eigen::MatrixXd x(in, 2);
      for (int i = 0; i < x.size(); ++i)
        x.data()[i] = rng.uniform01() * 2.0 - 1.0;
      Eigen::MatrixXd w(out, 2);
      for (int i = 0; i < w.size(); ++i)
        w.data()[i] = rng.uniform01() * 2.0 - 1.0;

      Mlp::Cache cache;
      net.forward(x, cache);
      const Eigen::VectorXd analytic = net.backward(cache, w);
      Mlp probe = net;
      check_grad(
          analytic,
          [&](const Eigen::VectorXd& p) {
            probe.params() = p;
            return (probe.forward(x).array() * w.array()).sum();
          },
          net.params(), 24, 1000 + draw);
    }
  }
}

TEST_CASE("adam basics") {
  Eigen::VectorXd params = Eigen::VectorXd::Constant(4, 1.0);
  Adam opt(0.01, 4);

  SUBCASE("zero gradient leaves parameters unchanged") {
    const Eigen::VectorXd before = params;
    opt.update(params, Eigen::VectorXd::Zero(4));
    CHECK(params == before);
  }

  SUBCASE("first step with constant gradient") {
    Eigen::VectorXd g(4);
    g << 0.5, -2.0, 1e-3, 3.0;
    opt.update(params, g);
    for (int i = 0; i < 4; ++i) {
      const double expect = 1.0 - 0.01 * g[i] / (std::abs(g[i]) + 1e-8);
      CHECK(params[i] == doctest::Approx(expect).epsilon(1e-12));
      CHECK(std::abs(params[i] - (1.0 - 0.01 * (g[i] > 0 ? 1.0 : -1.0))) <
            1e-5);
    }
  }

  SUBCASE("non-finite gradient is rejected") {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(4);
    g[2] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(opt.update(params, g), NumericFault);
  }
}

TEST_CASE("training steps are bit-deterministic") {
  auto run = [] {
    Mlp net(MlpSpec{{3, 16, 2}, 0.01}, 9);
    Adam opt(1e-3, net.param_count());
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
      Eigen::MatrixXd x(3, 4), w(2, 4);
      for (int j = 0; j < x.size(); ++j) x.data()[j] = rng.uniform01();
      for (int j = 0; j < w.size(); ++j) w.data()[j] = rng.uniform01() - 0.5;
      Mlp::Cache cache;
      net.forward(x, cache);
      opt.update(net.params(), net.backward(cache, w));
    }
    return net.params();
  };
  CHECK(run() == run());
}

TEST_CASE("masked softmax") {
  const Eigen::VectorXd logits =
      (Eigen::VectorXd(3) << std::log(2.0), 0.0, 5.0).finished();

  SUBCASE("uniform over equal logits") {
    const Eigen::VectorXd p =
        softmax_masked(Eigen::VectorXd::Zero(4), {1, 1, 0, 1});
    CHECK(p[0] == doctest::Approx(1.0 / 3));
    CHECK(p[2] == 0.0);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("log-ratio pair") {
    const Eigen::VectorXd p = softmax_masked(logits, {1, 1, 0});
    CHECK(p[0] == doctest::Approx(2.0 / 3).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(p[2] == 0.0);
  }

  SUBCASE("single unmasked entry") {
    const Eigen::VectorXd p = softmax_masked(logits, {0, 1, 0});
    CHECK(p[1] == 1.0);
  }

  SUBCASE("empty mask throws") {
    CHECK_THROWS_AS(softmax_masked(logits, {0, 0, 0}), ContractViolation);
  }

  SUBCASE("invariant to constant shifts") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd z(5);
      for (int i = 0; i < 5; ++i) z[i] = rng.uniform01() * 10 - 5;
      const std::vector<char> mask{1, 0, 1, 1, 0};
      const double c = rng.uniform01() * 100 - 50;
      const Eigen::VectorXd a = softmax_masked(z, mask);
      const Eigen::VectorXd b = softmax_masked(z.array() + c, mask);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("entropy") {
  Eigen::VectorXd p(3);
  p << 0.5, 0.5, 0.0;
  CHECK(entropy(p) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("checkpoint round trip") {
  Mlp net(MlpSpec{{6, 32, 4}, 0.01}, 77);
  const Mlp copy = Mlp::from_json(net.to_json());
  CHECK(copy.spec().layers == net.spec().layers);
  CHECK(copy.params() == net.params());
  CHECK_THROWS_AS(Mlp::from_json("{\"format\":\"bogus\"}"), ConfigError);
}
