#include <doctest.h>

#include <cmath>

#include "adisep/adis.hpp"
#include "adisep/errors.hpp"
#include "adisep/gradcheck.hpp"
#include "oracles.hpp"

using namespace adisep;

namespace {

// Per-pixel reference: zero-based interval holding v, or -1 for invalid pixels.
int reference_interval(double v, std::span<const double> b) {
  const int n = static_cast<int>(b.size()) - 1;
  for (int i = 0; i < n - 1; ++i) {
    if (v >= b[i] && v < b[i + 1]) return i;
  }
  return n - 1;
}

BoundHead random_head(oracle::Rng& rng, int c, int h, int w, int n) {
  BoundHead head(c, h, w, n);
  head.randomize(rng, 1.0);
  return head;
}

}  // namespace

TEST_CASE("depth map validity rules") {
  DepthMap m(2, 3, {1.0, 0.0, -2.0, NAN, INFINITY, 4.5});
  CHECK(m.valid(0, 0));
  CHECK_FALSE(m.valid(0, 1));
  CHECK_FALSE(m.valid(0, 2));
  CHECK_FALSE(m.valid(1, 0));
  CHECK_FALSE(m.valid(1, 1));
  CHECK(m.valid_count() == 2);
  CHECK(m.depth(0, 2) == 0.0);
  CHECK(m.depth(1, 0) == 0.0);
  m.invalidate(0, 0);
  CHECK(m.valid_count() == 1);
  CHECK_THROWS_AS(DepthMap(0, 3), ShapeError);
  CHECK_THROWS_AS(DepthMap(2, 2, {1.0}), ShapeError);
}

TEST_CASE("partition factories and invariants") {
  const auto u = IntervalPartition::uniform(8, 80.0);
  const std::vector<double> want{0, 10, 20, 30, 40, 50, 60, 70, 80};
  CHECK(std::vector<double>(u.bounds().begin(), u.bounds().end()) == want);
  CHECK(u.d_max() == 80.0);

  const auto one = IntervalPartition::uniform(1, 55.0);
  CHECK(one.count() == 1);
  CHECK(one.lower(0) == 0.0);
  CHECK(one.upper(0) == 55.0);

  CHECK_THROWS_AS(IntervalPartition::from_bounds({0.0, 5.0, 5.0}), ParameterError);
  CHECK_THROWS_AS(IntervalPartition::from_bounds({1.0, 5.0}), ParameterError);
  CHECK_THROWS_AS(IntervalPartition::from_widths({2.0, 0.0}), ParameterError);
  CHECK_THROWS_AS(IntervalPartition::from_fractions(std::vector<double>{0.5, 0.4}, 80.0), ParameterError);
  CHECK_THROWS_AS(IntervalPartition::uniform(0, 80.0), ParameterError);
  CHECK_THROWS_AS(IntervalPartition::uniform(4, -1.0), ParameterError);
}

TEST_CASE("interval_of agrees with a linear scan") {
  oracle::Rng rng(20);
  for (int t = 0; t < 50; ++t) {
    const auto p = oracle::random_partition(rng, oracle::uniform_int(rng, 1, 20), 80.0);
    for (int k = 0; k < 200; ++k) {
      const double v = oracle::uniform(rng, 0.0, 100.0);
      CHECK(p.interval_of(v) == reference_interval(v, p.bounds()));
    }
    for (int i = 0; i < p.count(); ++i) CHECK(p.interval_of(p.lower(i)) == i);
  }
}

TEST_CASE("bound head: uniform logits give evenly spaced bounds") {
  BoundHead head(3, 4, 5, 8);
  const auto p = compute_bounds(FeatureMap({3, 4, 5}, 0.7), head, 80.0);
  for (int i = 0; i <= 8; ++i) CHECK(p.bounds()[i] == 10.0 * i);
}

TEST_CASE("bound head: single interval covers the range") {
  oracle::Rng rng(21);
  const auto head = random_head(rng, 2, 3, 3, 1);
  const auto p = compute_bounds(FeatureMap({2, 3, 3}, oracle::random_values(rng, 18)), head, 80.0);
  CHECK(p.count() == 1);
  CHECK(p.lower(0) == 0.0);
  CHECK(p.upper(0) == doctest::Approx(80.0).epsilon(1e-12));
}

TEST_CASE("bound head: widths match a scalar softmax recomputation") {
  oracle::Rng rng(22);
  for (int t = 0; t < 25; ++t) {
    const int c = 2, h = 3, w = 4, n = oracle::uniform_int(rng, 1, 10);
    const auto head = random_head(rng, c, h, w, n);
    const FeatureMap f({c, h, w}, oracle::random_values(rng, static_cast<std::size_t>(c * h * w)));
    const auto p = compute_bounds(f, head, 80.0);

    std::vector<double> reduced(static_cast<std::size_t>(h * w));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = head.reduce.bias.value[0];
        for (int ch = 0; ch < c; ++ch) s += head.reduce.weight(0, ch, 0, 0) * f.at(ch, y, x);
        reduced[static_cast<std::size_t>(y * w + x)] = s;
      }
    std::vector<double> logits(n);
    double mx = -INFINITY;
    for (int o = 0; o < n; ++o) {
      double s = head.fc.bias.value[o];
      for (int i = 0; i < h * w; ++i) s += head.fc.weight.value[static_cast<std::size_t>(o * h * w + i)] * reduced[i];
      logits[o] = s;
      mx = std::max(mx, s);
    }
    double z = 0.0;
    for (double& l : logits) z += (l = std::exp(l - mx));
    // fractions below the floor are raised to it and the rest renormalised
    double floored = 0.0;
    for (double& l : logits) floored += (l = std::max(l / z, kMinIntervalFraction));
    double total = 0.0;
    for (int o = 0; o < n; ++o) {
      CHECK(p.widths()[o] > 0.0);
      CHECK(p.widths()[o] == doctest::Approx(logits[o] / floored * 80.0).epsilon(1e-12));
      total += p.widths()[o];
    }
    CHECK(std::abs(total - 80.0) < 1e-9);
    CHECK(std::abs(p.d_max() - 80.0) < 1e-9);
  }
}

TEST_CASE("bound head: permuting the output rows permutes the widths") {
  oracle::Rng rng(23);
  const int n = 6;
  auto head = random_head(rng, 2, 3, 3, n);
  const FeatureMap f({2, 3, 3}, oracle::random_values(rng, 18));
  const auto p = compute_bounds(f, head, 80.0);

  std::vector<int> perm{3, 0, 5, 1, 4, 2};
  BoundHead permuted = head;
  for (int o = 0; o < n; ++o) {
    permuted.fc.bias.value[o] = head.fc.bias.value[perm[o]];
    for (int i = 0; i < 9; ++i) permuted.fc.weight.value[o * 9 + i] = head.fc.weight.value[perm[o] * 9 + i];
  }
  const auto q = compute_bounds(f, permuted, 80.0);
  for (int o = 0; o < n; ++o) CHECK(q.widths()[o] == doctest::Approx(p.widths()[perm[o]]).epsilon(1e-12));
}

TEST_CASE("bound head: a near one-hot softmax still gives strictly increasing bounds") {
  BoundHead head(1, 2, 2, 6);
  head.fc.bias.value = {0.0, 900.0, -900.0, 0.0, 60.0, -60.0};
  const auto p = compute_bounds(FeatureMap({1, 2, 2}, 0.0), head, 80.0);
  for (double w : p.widths()) CHECK(w >= 0.99 * kMinIntervalFraction * 80.0);
  for (int i = 0; i < 6; ++i) CHECK(p.bounds()[i + 1] > p.bounds()[i]);
  CHECK(std::abs(p.d_max() - 80.0) < 1e-9);
  // the dominant interval takes everything the floors leave
  CHECK(p.widths()[1] == doctest::Approx(80.0).epsilon(1e-9));
}

TEST_CASE("bound head: gradient through floored fractions") {
  oracle::Rng rng(27);
  BoundHead head(2, 2, 3, 5);
  head.randomize(rng, 0.3);
  head.fc.bias.value = {-20.0, 9.0, 8.0, -25.0, 7.0};  // intervals 0 and 3 sit below the floor
  const FeatureMap f({2, 2, 3}, oracle::random_values(rng, 12));
  const auto dl = oracle::random_values(rng, 5);
  const auto trace = bound_head_forward(f, head);
  REQUIRE(trace.fractions != trace.softmax);

  auto loss = [&](std::span<const double> bias) {
    BoundHead h = head;
    h.fc.bias.value.assign(bias.begin(), bias.end());
    const auto p = compute_bounds(f, h, 80.0);
    double s = 0.0;
    for (int i = 0; i < 5; ++i) s += dl[i] * p.widths()[i];
    return s;
  };
  FeatureMap fused = f;
  head.zero_grad();
  compute_bounds_backward(fused, head, trace, 80.0, dl);
  CHECK(relative_error(head.fc.bias.grad, numeric_gradient(loss, head.fc.bias.value)) < 1e-5);
}

TEST_CASE("bound head rejects a feature of the wrong size") {
  BoundHead head(2, 3, 3, 4);
  CHECK_THROWS_AS(compute_bounds(FeatureMap({2, 3, 4}), head, 80.0), ShapeError);
}

TEST_CASE("separate: constant map lands in one layer") {
  const DepthMap m(3, 3, std::vector<double>(9, 5.0));
  const auto s = separate(m, IntervalPartition::from_bounds({0, 10, 20}));
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(s.layer(0)[i] == 5.0);
    CHECK(s.layer(1)[i] == 0.0);
  }
}

TEST_CASE("separate: 2x2 example") {
  const DepthMap m(2, 2, {1, 5, 9, 12});
  const auto s = separate(m, IntervalPartition::from_bounds({0, 4, 8, 12}));
  const std::vector<std::vector<double>> want{{1, 0, 0, 0}, {0, 5, 0, 0}, {0, 0, 9, 12}};
  for (int i = 0; i < 3; ++i) CHECK(std::vector<double>(s.layer(i).begin(), s.layer(i).end()) == want[i]);
  CHECK(s.occupancy() == std::vector<std::size_t>{1, 1, 2});
}

TEST_CASE("separate: depth beyond D_max is kept in the last layer") {
  const DepthMap m(1, 3, {2.0, 0.0, 83.0});
  const auto p = IntervalPartition::uniform(8, 80.0);
  const auto s = separate(m, p);
  CHECK(s.at(7, 0, 2) == 83.0);
  for (int i = 0; i < 7; ++i) CHECK(s.at(i, 0, 2) == 0.0);
  for (int i = 0; i < 8; ++i) CHECK(s.at(i, 0, 1) == 0.0);
  CHECK(reconstruct(s) == m);
}

TEST_CASE("reconstruct: all-invalid map and random maps") {
  const DepthMap empty(4, 5);
  const auto r = reconstruct(separate(empty, IntervalPartition::uniform(3, 80.0)));
  CHECK(r.valid_count() == 0);
  for (double v : r.depths()) CHECK(v == 0.0);

  oracle::Rng rng(24);
  for (int t = 0; t < 10; ++t) {
    const auto m = oracle::random_depth(rng, 64, 64, 100.0, 0.7);
    const auto p = oracle::random_partition(rng, oracle::uniform_int(rng, 1, 16), 80.0);
    const auto s = separate(m, p);
    CHECK(reconstruct(s) == m);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        int nonzero = 0;
        for (int i = 0; i < p.count(); ++i) {
          const double v = s.at(i, y, x);
          if (v == 0.0) continue;
          ++nonzero;
          CHECK(i == reference_interval(v, p.bounds()));
        }
        CHECK(nonzero == (m.valid(y, x) ? 1 : 0));
      }
  }
}

TEST_CASE("soft separation saturates for a centered value and small tau") {
  const DepthMap m(1, 1, {15.0});
  const std::vector<double> b{0, 10, 20, 30};
  const auto w = soft_interval_weights(m, b, 0.01);
  CHECK(w.at(1, 0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w.at(0, 0, 0) < 1e-12);
  CHECK(w.at(2, 0, 0) < 1e-12);
  const auto sd = soft_separate(m, b, 0.01);
  CHECK(sd.at(1, 0, 0) == doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("soft weights telescope to sigmoid(v / tau) and vanish on invalid pixels") {
  oracle::Rng rng(25);
  const auto m = oracle::random_depth(rng, 6, 7, 90.0, 0.8);
  const auto p = oracle::random_partition(rng, 5, 80.0);
  const double tau = 0.7;
  const auto w = soft_interval_weights(m, p.bounds(), tau);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 7; ++x) {
      double s = 0.0;
      for (int i = 0; i < 5; ++i) {
        CHECK(w.at(i, y, x) >= 0.0);
        s += w.at(i, y, x);
      }
      if (m.valid(y, x)) {
        CHECK(s == doctest::Approx(1.0 / (1.0 + std::exp(-m.depth(y, x) / tau))).epsilon(1e-12));
      } else {
        CHECK(s == 0.0);
      }
    }
}

TEST_CASE("soft separation rejects non-positive temperature") {
  const DepthMap m(1, 1, {3.0});
  const std::vector<double> b{0, 10};
  CHECK_THROWS_AS(soft_separate(m, b, 0.0), ParameterError);
  CHECK_THROWS_AS(soft_separate(m, b, -1.0), ParameterError);
}

TEST_CASE("soft separation bound gradients are finite and match finite differences") {
  oracle::Rng rng(26);
  const auto m = oracle::random_depth(rng, 5, 6, 85.0, 0.8);
  const auto p = oracle::random_partition(rng, 4, 80.0);
  const std::vector<double> b(p.bounds().begin(), p.bounds().end());
  const double tau = 2.0;
  const auto w = oracle::random_values(rng, 4 * 30);
  const auto g = soft_separate_backward(m, b, tau, w);
  for (double v : g) CHECK(std::isfinite(v));
  // b_0 = 0 is fixed by the partition contract, so differentiate b_1..b_n
  auto loss = [&](std::span<const double> upper) {
    std::vector<double> bb{0.0};
    bb.insert(bb.end(), upper.begin(), upper.end());
    const auto out = soft_separate(m, bb, tau);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
    return s;
  };
  const std::vector<double> upper(b.begin() + 1, b.end());
  CHECK(relative_error(std::span(g).subspan(1), numeric_gradient(loss, upper)) < 1e-4);
}

TEST_CASE("bounds_grad_to_widths is a suffix sum") {
  const std::vector<double> gb{9.0, 1.0, 2.0, 3.0};
  CHECK(bounds_grad_to_widths(gb) == std::vector<double>{6.0, 5.0, 3.0});
}
