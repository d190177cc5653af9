#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "strata/surrogate.hpp"

using namespace strata;
using doctest::Approx;

namespace {

const Boundaries<double> kThree{0.2, 0.4, 0.6};

// High-precision reference values (50-digit arithmetic, rounded to double).
constexpr double kEntropy02 = 0.5004024235381879;
constexpr double kHinge02_04 = -0.8630462173553428;
constexpr double kH0 = -2.5020121176909394;
constexpr double kH3 = 1.682529167523141;
constexpr double kLogit02 = -1.3862943611198906;
constexpr double kLogit04 = -0.4054651081081644;

double logistic(double z) { return std::log1p(std::exp(-z)); }

}  // namespace

TEST_SUITE("logistic_params") {
  TEST_CASE("examples") {
    const auto half = logistic_params(0.5);
    CHECK(half.pos_intercept == Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(half.pos_slope == -0.5);
    CHECK(half.neg_intercept == Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(half.neg_slope == -0.5);

    const auto p = logistic_params(0.2);
    CHECK(p.pos_intercept == Approx(kEntropy02).epsilon(1e-15));
    CHECK(p.pos_slope == Approx(-0.8).epsilon(1e-15));
  }

  TEST_CASE("class symmetry holds exactly") {
    for (double pi : {0.3, 0.1, 0.45, 0.77}) {
      CHECK(logistic_params(pi).pos_intercept == logistic_params(1 - pi).neg_intercept);
      CHECK(logistic_params(pi).pos_slope == logistic_params(1 - pi).neg_slope);
    }
  }

  TEST_CASE("degenerate weights are domain errors") {
    CHECK_THROWS_AS(logistic_params(0.0), DomainError);
    CHECK_THROWS_AS(logistic_params(1.0), DomainError);
  }
}

TEST_SUITE("build_surrogate") {
  TEST_CASE("single boundary gives a scaled hinge loss") {
    const auto spec = logistic_surrogate(Boundaries<double>{0.5});
    REQUIRE(spec.hinges().size() == 2);
    CHECK(spec.hinges()[0] == Approx(-2 * std::log(2.0)).epsilon(1e-15));
    CHECK(spec.hinges()[1] == Approx(2 * std::log(2.0)).epsilon(1e-15));
    CHECK(spec.deltas()[0] == 0.0);
  }

  TEST_CASE("three boundaries: hinges and thresholds") {
    const auto spec = logistic_surrogate(kThree);
    const auto h = spec.hinges();
    CHECK(h[0] == Approx(kH0).epsilon(1e-13));
    CHECK(h[1] == Approx(kHinge02_04).epsilon(1e-13));
    CHECK(std::abs(h[2]) < 1e-14);
    CHECK(h[3] == Approx(kH3).epsilon(1e-13));
    CHECK(spec.deltas()[0] == Approx(kLogit02).epsilon(1e-15));
    CHECK(spec.deltas()[1] == Approx(kLogit04).epsilon(1e-15));
    CHECK(spec.deltas()[2] == Approx(-kLogit04).epsilon(1e-15));
  }

  TEST_CASE("rejection-option boundaries: three linear pieces per class") {
    const auto spec = logistic_surrogate(Boundaries<double>{0.2, 0.8});
    for (Label y : {Label::positive, Label::negative}) {
      // count distinct slopes along a fine grid
      std::vector<double> slopes;
      for (double z = -6; z <= 6; z += 0.01) {
        const double s = subgradient(spec, y, z);
        if (slopes.empty() || std::abs(slopes.back() - s) > 1e-12) slopes.push_back(s);
      }
      CHECK(slopes.size() == 3);
      CHECK(slopes.back() == 0.0);
    }
  }

  TEST_CASE("non-logistic tables use hinge midpoints") {
    const Boundaries<double> pi{0.25, 0.5, 0.75};
    auto table = logistic_param_table(pi);
    for (auto& row : table) {  // a common rescaling keeps every condition intact
      row.pos_intercept *= 3;
      row.pos_slope *= 3;
      row.neg_intercept *= 3;
      row.neg_slope *= 3;
    }
    const auto spec = build_surrogate(pi, table);
    const auto h = spec.hinges();
    for (std::size_t k = 1; k <= 3; ++k) CHECK(spec.deltas()[k - 1] == Approx((h[k - 1] + h[k]) / 2));
    CHECK(check_consistency(spec).ok());
  }

  TEST_CASE("inconsistent tables are rejected with a report") {
    auto table = logistic_param_table(kThree);
    table[0].neg_slope += 0.1;
    try {
      build_surrogate(kThree, table);
      FAIL("expected SurrogateError");
    } catch (const SurrogateError<double>& e) {
      CHECK_FALSE(e.report().c3_ok);
      const auto& idx = e.report().violating_indices;
      CHECK(std::find(idx.begin(), idx.end(), 1u) != idx.end());
    }
    CHECK_THROWS_AS(build_surrogate(kThree, std::vector<SegmentParams<double>>(2)), ConfigError);
  }
}

TEST_SUITE("check_consistency") {
  TEST_CASE("logistic-derived specs pass with tiny residuals") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 100; ++t) {
      const Boundaries<double> pi(oracle::random_boundaries(rng, 1 + t % 6));
      const auto report = check_consistency(logistic_surrogate(pi));
      CHECK(report.ok());
      for (double r : report.threshold_residuals) CHECK(std::abs(r) < 1e-12);
      CHECK(report.violating_indices.empty());
    }
  }

  TEST_CASE("reordered segments break the slope ordering") {
    const auto good = logistic_surrogate(kThree);
    std::vector<Segment<double>> pos(good.pos_segments().rbegin(), good.pos_segments().rend());
    std::vector<Segment<double>> neg(good.neg_segments().rbegin(), good.neg_segments().rend());
    const SurrogateSpec<double> bad(kThree, pos, neg,
                                    std::vector<double>(good.deltas().begin(), good.deltas().end()),
                                    std::vector<double>(good.hinges().begin(), good.hinges().end()));
    const auto report = check_consistency(bad);
    CHECK_FALSE(report.c1_ok);
    CHECK_FALSE(report.ok());
  }

  TEST_CASE("a threshold outside its hinge interval fails") {
    const auto good = logistic_surrogate(kThree);
    std::vector<double> deltas(good.deltas().begin(), good.deltas().end());
    deltas[1] = 0.2;  // belongs between H_2 and H_3
    const SurrogateSpec<double> bad(kThree, {good.pos_segments().begin(), good.pos_segments().end()},
                                    {good.neg_segments().begin(), good.neg_segments().end()}, deltas,
                                    {good.hinges().begin(), good.hinges().end()});
    const auto report = check_consistency(bad);
    CHECK_FALSE(report.c2_ok);
    CHECK_FALSE(report.c3_ok);
    CHECK(report.violating_indices == std::vector<std::size_t>{2});
  }

  TEST_CASE("negative hinges mirror positive hinges") {
    const auto spec = logistic_surrogate(Boundaries<double>{0.1, 0.35, 0.5, 0.9});
    const auto pos = spec.pos_segments();
    const auto neg = spec.neg_segments();
    for (std::size_t k = 1; k < spec.size(); ++k) {
      const double hp = (pos[k - 1].intercept - pos[k].intercept) / (pos[k].slope - pos[k - 1].slope);
      const double hn = (neg[k - 1].intercept - neg[k].intercept) / (neg[k].slope - neg[k - 1].slope);
      CHECK(std::abs(hp + hn) < 1e-9);
    }
  }
}

TEST_SUITE("eval_surrogate") {
  TEST_CASE("examples") {
    const auto half = logistic_surrogate(Boundaries<double>{0.5});
    CHECK(eval_surrogate(half, Label::positive, 2 * std::log(2.0)) == Approx(0.0).epsilon(1e-15));
    CHECK(eval_surrogate(half, Label::positive, 0.0) == Approx(std::log(2.0)).epsilon(1e-15));

    const auto spec = logistic_surrogate(kThree);
    CHECK(eval_surrogate(spec, Label::positive, -1.0) == Approx(1.3004024235381879).epsilon(1e-13));
    const auto segs = spec.pos_segments();
    CHECK(segs[0](-1.0) == Approx(1.300402).epsilon(1e-6));
    CHECK(segs[1](-1.0) == Approx(1.273012).epsilon(1e-6));
    CHECK(segs[2](-1.0) == Approx(1.073012).epsilon(1e-6));
    CHECK_THROWS_AS(eval_surrogate(spec, Label::positive, HUGE_VAL), DomainError);
  }

  TEST_CASE("matches an independent max-of-lines evaluation and is convex") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> uz(-8, 8);
    for (int t = 0; t < 20; ++t) {
      const Boundaries<double> pi(oracle::random_boundaries(rng, 1 + t % 6));
      const auto spec = logistic_surrogate(pi);
      std::vector<double> ap, bp, an, bn;
      for (double v : pi.values()) {  // written out from the tangent-line formulas
        const double hpos = -v * std::log(v) - (1 - v) * std::log(1 - v);
        ap.push_back(hpos);
        bp.push_back(-(1 - v));
        an.push_back(hpos);
        bn.push_back(-v);
      }
      for (int s = 0; s < 500; ++s) {
        double z[3] = {uz(rng), uz(rng), uz(rng)};
        std::sort(z, z + 3);
        for (Label y : {Label::positive, Label::negative}) {
          const auto& a = y == Label::positive ? ap : an;
          const auto& b = y == Label::positive ? bp : bn;
          CHECK(eval_surrogate(spec, y, z[1]) == Approx(oracle::piecewise_max(a, b, z[1])).epsilon(1e-12));
          if (z[2] - z[0] < 1e-9) continue;
          const double theta = (z[2] - z[1]) / (z[2] - z[0]);
          const double chord = theta * eval_surrogate(spec, y, z[0]) + (1 - theta) * eval_surrogate(spec, y, z[2]);
          CHECK(eval_surrogate(spec, y, z[1]) <= chord + 1e-12);
        }
      }
    }
  }

  TEST_CASE("tangent to the logistic loss at each threshold") {
    std::mt19937_64 rng(29);
    for (int t = 0; t < 50; ++t) {
      const Boundaries<double> pi(oracle::random_boundaries(rng, 1 + t % 6));
      const auto spec = logistic_surrogate(pi);
      for (double d : spec.deltas()) {
        CHECK(std::abs(eval_surrogate(spec, Label::positive, d) - logistic(d)) < 1e-9);
        CHECK(std::abs(eval_surrogate(spec, Label::negative, -d) - logistic(-d)) < 1e-9);
      }
    }
  }

  TEST_CASE("single boundary is a scaled hinge loss") {
    const auto spec = logistic_surrogate(Boundaries<double>{0.5});
    const double l2 = std::log(2.0);
    for (double z = -5; z <= 5; z += 0.037)
      for (Label y : {Label::positive, Label::negative})
        CHECK(eval_surrogate(spec, y, z) == Approx(l2 * std::max(0.0, 1 - z / (2 * l2))).epsilon(1e-13));
  }
}

TEST_SUITE("subgradient") {
  TEST_CASE("examples") {
    const auto spec = logistic_surrogate(kThree);
    CHECK(subgradient(spec, Label::positive, -1.0) == Approx(-0.8));
    CHECK(subgradient(spec, Label::positive, 10.0) == 0.0);
    CHECK(subgradient(spec, Label::positive, 0.0) == Approx(-0.4));  // kink between pi=0.4 and pi=0.6
    CHECK(subgradient(spec, Label::negative, -10.0) == Approx(-0.6));  // steepest segment, pi_K
    CHECK(subgradient(spec, Label::negative, 10.0) == 0.0);
  }

  TEST_CASE("kinks resolve to the right derivative") {
    const auto spec = logistic_surrogate(kThree);
    for (Label y : {Label::positive, Label::negative}) {
      for (double h : spec.hinges()) {
        const double z = y == Label::positive ? h : -h;
        CHECK(subgradient(spec, y, z) == Approx(subgradient(spec, y, z + 1e-6)));
      }
    }
  }

  TEST_CASE("is a valid subgradient everywhere") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> uz(-6, 6);
    for (int t = 0; t < 20; ++t) {
      const Boundaries<double> pi(oracle::random_boundaries(rng, 1 + t % 6));
      const auto spec = logistic_surrogate(pi);
      std::vector<double> points;
      for (int s = 0; s < 200; ++s) points.push_back(uz(rng));
      for (double h : spec.hinges()) {
        points.push_back(h);
        points.push_back(-h);
      }
      for (Label y : {Label::positive, Label::negative})
        for (double z : points) {
          const double g = subgradient(spec, y, z);
          CHECK(g <= 0.0);
          for (int s = 0; s < 20; ++s) {
            const double zz = uz(rng);
            CHECK(eval_surrogate(spec, y, zz) >= eval_surrogate(spec, y, z) + g * (zz - z) - 1e-12);
          }
        }
    }
  }
}

TEST_SUITE("consistency") {
  TEST_CASE("pointwise risk minimizer crosses each threshold as p crosses each boundary") {
    std::mt19937_64 rng(37);
    for (int t = 0; t < 10; ++t) {
      const Boundaries<double> pi(oracle::random_boundaries(rng, 1 + t % 4, 0.05));
      const auto spec = logistic_surrogate(pi);
      auto minimizer = [&](double p) {
        double best_f = 0, best = INFINITY;
        for (double f = -8; f <= 8; f += 1e-3) {
          const double r = p * eval_surrogate(spec, Label::positive, f) +
                           (1 - p) * eval_surrogate(spec, Label::negative, -f);
          if (r < best - 1e-15) {
            best = r;
            best_f = f;
          }
        }
        return best_f;
      };
      for (std::size_t k = 1; k <= pi.size(); ++k) {
        const double d = spec.deltas()[k - 1];
        CHECK(minimizer(pi[k] - 0.01) < d);
        CHECK(minimizer(pi[k] + 0.01) > d);
      }
    }
  }
}

TEST_SUITE("risk_constant") {
  TEST_CASE("examples") {
    CHECK(risk_constant(logistic_surrogate(kThree)) == Approx(2.466303462376432).epsilon(1e-12));
    CHECK(risk_constant(logistic_surrogate(Boundaries<double>{0.5})) ==
          Approx(0.7213475204444817).epsilon(1e-12));
  }

  TEST_CASE("positive and finite on random specs") {
    std::mt19937_64 rng(41);
    for (int t = 0; t < 100; ++t) {
      const double c = risk_constant(logistic_surrogate(Boundaries<double>(oracle::random_boundaries(rng, 1 + t % 6))));
      CHECK(c > 0);
      CHECK(std::isfinite(c));
    }
  }

  TEST_CASE("threshold on a hinge is degenerate") {
    const auto good = logistic_surrogate(Boundaries<double>{0.5});
    const SurrogateSpec<double> bad(good.boundaries(), {good.pos_segments().begin(), good.pos_segments().end()},
                                    {good.neg_segments().begin(), good.neg_segments().end()},
                                    std::vector<double>{good.hinges()[0]},
                                    {good.hinges().begin(), good.hinges().end()});
    CHECK_THROWS_AS(risk_constant(bad), ConfigError);
  }
}
