#include <doctest.h>

#include <cmath>

#include "relux/errors.hpp"
#include "relux/extraction.hpp"
#include "relux/model_io.hpp"
#include "relux/network.hpp"
#include "relux/rng.hpp"
#include "test_helpers.hpp"

using namespace relux;
using testsupport::random_network;
using testsupport::single_neuron;
using testsupport::unit;

namespace {

Network bump_network(double a, double delta) {
  Network net;
  net.dim = 1;
  net.neurons = {
      {+1.0, Vec::Constant(1, 1.0), a, std::nullopt},
      {+1.0, Vec::Constant(1, 1.0), a + delta, std::nullopt},
      {-1.0, Vec::Constant(1, 2.0), 2.0 * a + delta, std::nullopt},
  };
  return net;
}

}  // namespace

TEST_CASE("evaluate: single unit on and off") {
  const Network net = single_neuron(+1.0, unit(2, 0), 0.0);
  Vec x(2);
  x << 2.0, 0.0;
  CHECK(evaluate(net, x) == doctest::Approx(2.0));
  x << -2.0, 0.0;
  CHECK(evaluate(net, x) == doctest::Approx(0.0));
}

TEST_CASE("evaluate: bump at its peak") {
  const Network net = bump_network(0.0, 1.0);
  CHECK(evaluate(net, Vec::Constant(1, 0.5)) == doctest::Approx(0.5));
}

TEST_CASE("evaluate: dimension mismatch is an input error") {
  const Network net = single_neuron(+1.0, unit(2, 0), 0.0);
  CHECK_THROWS_AS(evaluate(net, Vec::Zero(3)), InputError);
}

TEST_CASE("evaluate: affine tail subtracts its bias") {
  Network net = Network::empty(2);
  net.affine_w = Vec(2);
  *net.affine_w << 1.0, 2.0;
  net.affine_b = 3.0;
  Vec x(2);
  x << 1.0, 1.0;
  CHECK(evaluate(net, x) == doctest::Approx(0.0));
}

TEST_CASE("restrict: simple line evaluations") {
  const Network net = single_neuron(+1.0, unit(2, 0), 1.0);
  GaussianLine line;
  line.x0 = Vec::Zero(2);
  line.v = unit(2, 0);
  const LineRestriction f(net, line);
  CHECK(f(3.0) == doctest::Approx(2.0));
  CHECK(f(0.0) == doctest::Approx(0.0));
}

TEST_CASE("restrict agrees with direct evaluation on random nets") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + static_cast<int>(rng.uniform(0.0, 6.0));
    const Network net = random_network(d, 1 + trial % 5, rng);
    const GaussianLine line =
        sample_gaussian_line(d, derive_seed(7, trial));
    const LineRestriction f(net, line);
    const double t = 10.0 * rng.normal();
    const double direct = evaluate(net, line.point_at(t));
    CHECK(std::abs(f(t) - direct) <= 1e-12 * (1.0 + std::abs(direct)));
  }
}

TEST_CASE("critical points: axis-aligned examples") {
  GaussianLine line;
  line.x0 = Vec::Zero(2);
  line.v = unit(2, 0);
  const Network net = single_neuron(+1.0, unit(2, 0), 1.0);
  const CriticalPointResult res = critical_points(net, line);
  REQUIRE(res.points.size() == 1);
  CHECK(res.points[0].t == doctest::Approx(1.0));
  CHECK(res.skipped.empty());

  // direction perpendicular to the weight: reported as skipped
  GaussianLine perp;
  perp.x0 = Vec(2);
  perp.x0 << 3.0, 0.0;
  perp.v = unit(2, 1);
  const Network net2 = single_neuron(+1.0, unit(2, 0), 0.0);
  const CriticalPointResult res2 = critical_points(net2, perp);
  CHECK(res2.points.empty());
  REQUIRE(res2.skipped.size() == 1);
  CHECK(res2.skipped[0] == 0);
}

TEST_CASE("critical points sit on activation boundaries and sort ascending") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 2 + trial % 5;
    const Network net = random_network(d, 1 + trial % 6, rng);
    const GaussianLine line = sample_gaussian_line(d, derive_seed(31, trial));
    const CriticalPointResult res = critical_points(net, line);
    for (size_t i = 1; i < res.points.size(); ++i)
      CHECK(res.points[i - 1].t <= res.points[i].t);
    for (const CriticalPoint& cp : res.points) {
      const Neuron& n = net.neurons[cp.neuron_index];
      const double residual =
          std::abs(n.w.dot(line.point_at(cp.t)) - n.bias);
      CHECK(residual <= 1e-9);
    }
  }
}

TEST_CASE("slope change across a critical point equals |<w_i, v>|") {
  Rng rng(12);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 2 + trial % 4;
    const Network net = random_network(d, 2 + trial % 4, rng);
    const GaussianLine line = sample_gaussian_line(d, derive_seed(77, trial));
    const CriticalPointResult res = critical_points(net, line);
    const LineRestriction f(net, line);
    for (size_t i = 0; i < res.points.size(); ++i) {
      double gap = 1.0;
      if (i > 0) gap = std::min(gap, res.points[i].t - res.points[i - 1].t);
      if (i + 1 < res.points.size())
        gap = std::min(gap, res.points[i + 1].t - res.points[i].t);
      const double h = gap / 2.0;
      if (h < 1e-7) continue;  // not a generic instance
      const double t = res.points[i].t;
      const double left = (f(t) - f(t - h)) / h;
      const double right = (f(t + h) - f(t)) / h;
      const Neuron& n = net.neurons[res.points[i].neuron_index];
      CHECK(std::abs(std::abs(right - left) - std::abs(n.w.dot(line.v))) <=
            1e-6 * (1.0 + std::abs(n.w.dot(line.v))));
      ++checked;
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("network file format round trips exactly") {
  Rng rng(5);
  Network net = random_network(3, 4, rng);
  net.neurons[1].coeff = 2.71828182845904523;
  net.affine_w = rng.normal_vector(3);
  net.affine_b = -0.125;

  const std::string text = network_to_json(net);
  const Network back = network_from_json(text);
  REQUIRE(back.dim == net.dim);
  REQUIRE(back.size() == net.size());
  for (int i = 0; i < net.size(); ++i) {
    CHECK(back.neurons[i].sign == net.neurons[i].sign);
    CHECK((back.neurons[i].w - net.neurons[i].w).norm() == 0.0);
    CHECK(back.neurons[i].bias == net.neurons[i].bias);
    CHECK(back.neurons[i].coeff == net.neurons[i].coeff);
  }
  CHECK((*back.affine_w - *net.affine_w).norm() == 0.0);
  CHECK(*back.affine_b == *net.affine_b);
  // serialization is deterministic
  CHECK(network_to_json(back) == text);
}

TEST_CASE("validate rejects malformed networks") {
  Network net = single_neuron(+1.0, unit(2, 0), 0.0);
  net.neurons[0].sign = 0.5;
  CHECK_THROWS_AS(net.validate(), InputError);
  net.neurons[0].sign = 1.0;
  net.neurons[0].w = Vec::Zero(3);
  CHECK_THROWS_AS(net.validate(), InputError);
}

TEST_CASE("weight and bias radii") {
  Rng rng(9);
  const Network net = random_network(4, 5, rng, 2.0, 3.0);
  double r = 0.0, b = 0.0;
  for (const Neuron& n : net.neurons) {
    r = std::max(r, n.w.norm());
    b = std::max(b, std::abs(n.bias));
  }
  CHECK(net.weight_radius() == doctest::Approx(r));
  CHECK(net.bias_radius() == doctest::Approx(b));
}
