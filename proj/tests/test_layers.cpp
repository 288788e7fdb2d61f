#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "surreal/layers.hpp"

using namespace surreal;

namespace {

ComplexField random_field(std::mt19937_64& rng, std::vector<std::size_t> shape) {
  std::uniform_real_distribution<double> lr(-1.5, 1.5);
  std::uniform_real_distribution<double> th(-kPi, kPi);
  ComplexField f = make_field(std::move(shape));
  for (auto& p : f.data) p = make_polar(lr(rng), th(rng));
  return f;
}

ConvSpec uniform_conv(std::size_t in_c, std::size_t out_c,
                      std::vector<std::size_t> kernel,
                      std::vector<std::size_t> stride) {
  ConvSpec spec;
  spec.in_channels = in_c;
  spec.out_channels = out_c;
  spec.kernel = std::move(kernel);
  spec.stride = std::move(stride);
  std::size_t window = in_c;
  for (std::size_t k : spec.kernel) window *= k;
  spec.weights.assign(out_c, ConvexWeights::uniform(window));
  return spec;
}

// logits that put essentially all mass on one window entry
ConvexWeights spike(std::size_t size, std::size_t hot) {
  std::vector<double> logits(size, -40.0);
  logits[hot] = 40.0;
  return ConvexWeights(logits);
}

ComplexField acted(const ComplexField& f, const GroupElement& g) {
  ComplexField out = f;
  for (auto& p : out.data) p = act(g, p);
  return out;
}

}  // namespace

TEST_CASE("conv output shapes follow the sliding-window count") {
  CHECK(conv_output_shape({1, 6, 6}, uniform_conv(1, 5, {2, 2}, {2, 2})) ==
        std::vector<std::size_t>{5, 3, 3});
  CHECK(conv_output_shape({2, 10}, uniform_conv(2, 3, {3}, {2})) ==
        std::vector<std::size_t>{3, 4});
  // leftover columns that never fit a window are dropped
  CHECK(conv_output_shape({1, 7, 5}, uniform_conv(1, 1, {2, 2}, {2, 2})) ==
        std::vector<std::size_t>{1, 3, 2});
}

TEST_CASE("1x1 convolution with a single channel is the identity") {
  std::mt19937_64 rng(601);
  const ComplexField x = random_field(rng, {1, 4, 4});
  const ComplexField y = wfm_conv(x, uniform_conv(1, 1, {1, 1}, {1, 1}));
  REQUIRE(y.shape == x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    CHECK(y.data[i].log_r == x.data[i].log_r);
    CHECK(y.data[i].theta == x.data[i].theta);
  }
}

TEST_CASE("uniform window mean matches the arithmetic mean inside a chart") {
  ComplexField x = make_field({1, 2, 2});
  x.data = {{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}, {0.7, 0.8}};
  const ComplexField y = wfm_conv(x, uniform_conv(1, 1, {2, 2}, {2, 2}));
  REQUIRE(y.shape == std::vector<std::size_t>{1, 1, 1});
  CHECK(y.data[0].log_r == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(y.data[0].theta == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("windows flatten channel-major, then row-major") {
  // two channels over a 1x2 image; window = whole image
  ComplexField x = make_field({2, 1, 2});
  x.data = {{0.0, 0.10}, {0.0, 0.20},   // channel 0, positions 0 and 1
            {0.0, 0.30}, {0.0, 0.40}};  // channel 1
  const std::vector<double> expect{0.10, 0.20, 0.30, 0.40};
  for (std::size_t hot = 0; hot < 4; ++hot) {
    ConvSpec spec = uniform_conv(2, 1, {1, 2}, {1, 2});
    spec.weights[0] = spike(4, hot);
    const ComplexField y = wfm_conv(x, spec);
    CHECK(y.data[0].theta == doctest::Approx(expect[hot]).epsilon(1e-10));
  }
}

TEST_CASE("convolution commutes with a global scale-and-rotate") {
  std::mt19937_64 rng(602);
  std::uniform_real_distribution<double> lr(-1.0, 1.0);
  std::uniform_real_distribution<double> th(-3.0, 3.0);
  for (int trial = 0; trial < 5; ++trial) {
    const ComplexField x = random_field(rng, {2, 4, 6});
    ConvSpec spec = uniform_conv(2, 3, {2, 2}, {1, 2});
    std::uniform_real_distribution<double> lo(-1.0, 1.0);
    for (auto& w : spec.weights) {
      std::vector<double> logits(8);
      for (auto& v : logits) v = lo(rng);
      w = ConvexWeights(logits);
    }
    const GroupElement g{lr(rng), th(rng)};
    const ComplexField lhs = wfm_conv(acted(x, g), spec);
    const ComplexField rhs = acted(wfm_conv(x, spec), g);
    REQUIRE(lhs.shape == rhs.shape);
    for (std::size_t i = 0; i < lhs.data.size(); ++i) {
      CHECK(lhs.data[i].log_r == doctest::Approx(rhs.data[i].log_r).epsilon(1e-12));
      CHECK(std::abs(wrap_angle(lhs.data[i].theta - rhs.data[i].theta)) < 1e-12);
    }
  }
}

TEST_CASE("rectification clamps both coordinates at the identity") {
  const double grid[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  ComplexField x = make_field({1, 5, 5});
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      x.data[i * 5 + j] = {grid[i], grid[j]};
    }
  }
  const ComplexField y = trelu(x);
  REQUIRE(y.shape == x.shape);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(y.data[i * 5 + j].log_r == std::max(grid[i], 0.0));
      CHECK(y.data[i * 5 + j].theta == std::max(grid[j], 0.0));
    }
  }
  // idempotent, bit for bit
  const ComplexField z = trelu(y);
  for (std::size_t i = 0; i < z.data.size(); ++i) {
    CHECK(z.data[i].log_r == y.data[i].log_r);
    CHECK(z.data[i].theta == y.data[i].theta);
  }
}

TEST_CASE("distance features of a hand-computed pair") {
  ComplexField x = make_field({2, 1, 1});
  x.data = {{0.0, 0.0}, {1.0, 0.0}};
  DistanceFCSpec spec;
  spec.in_channels = 2;
  spec.out_channels = 1;
  spec.weights = {ConvexWeights::uniform(2)};
  const std::vector<double> u = distance_fc(x, spec);
  REQUIRE(u.size() == 2);
  CHECK(u[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(u[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("distance features come out row-major by output channel") {
  ComplexField x = make_field({2, 1, 1});
  x.data = {{0.0, 0.25}, {0.0, 1.25}};
  DistanceFCSpec spec;
  spec.in_channels = 2;
  spec.out_channels = 2;
  spec.weights = {spike(2, 0), spike(2, 1)};  // mean pinned to ch0, then ch1
  const std::vector<double> u = distance_fc(x, spec);
  REQUIRE(u.size() == 4);
  const double d = distance({0.0, 0.25}, {0.0, 1.25});
  CHECK(u[0] == doctest::Approx(0.0).epsilon(1e-9));  // d(ch0, ~ch0)
  CHECK(u[1] == doctest::Approx(d).epsilon(1e-9));    // d(ch1, ~ch0)
  CHECK(u[2] == doctest::Approx(d).epsilon(1e-9));
  CHECK(u[3] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("distance features ignore a global scale-and-rotate") {
  std::mt19937_64 rng(603);
  std::uniform_real_distribution<double> lr(-2.0, 2.0);
  std::uniform_real_distribution<double> th(-3.0, 3.0);
  std::uniform_real_distribution<double> lo(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const ComplexField x = random_field(rng, {3, 2, 2});
    DistanceFCSpec spec;
    spec.in_channels = 3;
    spec.out_channels = 2;
    for (int o = 0; o < 2; ++o) {
      std::vector<double> logits{lo(rng), lo(rng), lo(rng)};
      spec.weights.push_back(ConvexWeights(logits));
    }
    const GroupElement g{lr(rng), th(rng)};
    const std::vector<double> a = distance_fc(x, spec);
    const std::vector<double> b = distance_fc(acted(x, g), spec);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("unit-modulus projection keeps the phase bits") {
  std::mt19937_64 rng(604);
  const ComplexField x = random_field(rng, {2, 3});
  const ComplexField y = normalize_unit_modulus(x);
  REQUIRE(y.shape == x.shape);
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    CHECK(y.data[i].log_r == 0.0);
    CHECK(y.data[i].theta == x.data[i].theta);
  }
}

TEST_CASE("softmax head on a hand-computed example") {
  const std::vector<double> f{1.0, 2.0};
  const std::vector<double> w{1.0, 0.0, 0.0, 1.0};  // identity, classes x features
  const std::vector<double> b{0.0, 0.0};
  const std::vector<double> p = softmax_head(f, w, b);
  REQUIRE(p.size() == 2);
  const double e = std::exp(1.0);
  CHECK(p[0] == doctest::Approx(1.0 / (1.0 + e)));
  CHECK(p[1] == doctest::Approx(e / (1.0 + e)));
  CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("layer validation rejects inconsistent specs") {
  const std::vector<std::size_t> shape{2, 4, 4};
  // weight vector length must match the window
  ConvSpec bad = uniform_conv(2, 1, {2, 2}, {2, 2});
  bad.weights[0] = ConvexWeights::uniform(7);
  CHECK_THROWS_AS(validate(bad, shape), std::invalid_argument);
  // channel mismatch
  CHECK_THROWS_AS(validate(uniform_conv(3, 1, {2, 2}, {2, 2}), shape),
                  std::invalid_argument);
  // kernel larger than the image
  CHECK_THROWS_AS(validate(uniform_conv(2, 1, {5, 5}, {1, 1}), shape),
                  std::invalid_argument);
  // kernel rank differs from spatial rank
  CHECK_THROWS_AS(validate(uniform_conv(2, 1, {2}, {2}), shape),
                  std::invalid_argument);

  DistanceFCSpec dbad;
  dbad.in_channels = 2;
  dbad.out_channels = 1;
  dbad.weights = {ConvexWeights::uniform(3)};
  CHECK_THROWS_AS(validate(dbad, shape), std::invalid_argument);
}
