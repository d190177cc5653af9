#include <doctest.h>

#include <cmath>
#include <random>

#include "solver_oracles.hpp"
#include "strata/simulate.hpp"
#include "strata/solver.hpp"

using namespace strata;
using doctest::Approx;

namespace {

LabeledSample<double> sample_1d(std::initializer_list<std::pair<double, int>> rows) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), 1);
  Eigen::VectorXi y(static_cast<Eigen::Index>(rows.size()));
  Eigen::Index i = 0;
  for (auto [xi, yi] : rows) {
    x(i, 0) = xi;
    y(i++) = yi;
  }
  return {x, y};
}

const auto kHalf = logistic_surrogate(Boundaries<double>{0.5});

}  // namespace

TEST_SUITE("objective") {
  TEST_CASE("zero model gives log 2 for the single-boundary surrogate") {
    const auto data = sample_1d({{1.0, 1}, {-2.0, -1}, {0.5, -1}});
    CHECK(objective(data, LinearModel<double>::zero(1), kHalf, 0.1) == Approx(std::log(2.0)));
    CHECK(objective(data, LinearModel<double>::zero(1), kHalf, 1e6) == Approx(std::log(2.0)));
  }

  TEST_CASE("hand-evaluated single point") {
    const auto data = sample_1d({{1.0, 1}});
    LinearModel<double> m(Eigen::VectorXd::Constant(1, 3.0), 0.0);
    CHECK(objective(data, m, kHalf, 1.0) == Approx(4.5));
  }

  TEST_CASE("intercept is not penalized; dimension and lambda are checked") {
    const auto data = sample_1d({{1.0, 1}, {-1.0, -1}});
    LinearModel<double> m(Eigen::VectorXd::Zero(1), 50.0);
    CHECK(objective(data, m, kHalf, 1.0) == Approx(objective(data, m, kHalf, 100.0)));
    CHECK_THROWS_AS(objective(data, LinearModel<double>::zero(2), kHalf, 1.0), ConfigError);
    CHECK_THROWS_AS(objective(data, m, kHalf, 0.0), ConfigError);
  }
}

TEST_SUITE("prediction") {
  TEST_CASE("predict_margin") {
    LinearModel<double> m(Eigen::Vector2d(1, 2), -1);
    CHECK(predict_margin(m, Eigen::Vector2d(3, 0.5)) == 3.0);
    CHECK(predict_margin(LinearModel<double>::zero(2), Eigen::Vector2d(7, -3)) == 0.0);
    const Eigen::Vector2d a(0.3, -1.2), b(2.5, 0.7);
    CHECK(predict_margin(m, a) + predict_margin(m, b) - m.b == Approx(predict_margin(m, Eigen::Vector2d(a + b))));
    CHECK_THROWS_AS(predict_margin(m, Eigen::Vector3d(1, 2, 3)), ConfigError);
  }

  TEST_CASE("predict_interval through a spec") {
    const auto spec = logistic_surrogate(Boundaries<double>{0.2, 0.4, 0.6});
    CHECK(predict_interval(0.0, spec).value == 2);
    CHECK(predict_interval(-10.0, spec).value == 0);
    CHECK(predict_interval(10.0, spec).value == 3);
  }

  TEST_CASE("logistic helpers are stable") {
    CHECK(logistic_loss(0.0) == Approx(std::log(2.0)));
    CHECK(logistic_loss(800.0) >= 0.0);
    CHECK(logistic_loss(-800.0) == Approx(800.0));
    CHECK(logistic_loss_derivative(0.0) == Approx(-0.5));
    for (double f : {-700.0, -3.0, 0.0, 2.0, 30.0}) {
      CHECK(sigmoid(f) >= 0.0);
      CHECK(sigmoid(f) <= 1.0);
    }
    CHECK(sigmoid(2.0) > 0.0);
    CHECK(sigmoid(2.0) < 1.0);
  }
}

TEST_SUITE("fit_piecewise") {
  TEST_CASE("separable 1D data is fit past the hinge") {
    const auto data = sample_1d({{-1.0, -1}, {1.0, 1}});
    const auto fit = fit_piecewise(data, kHalf, 0.01);
    for (Eigen::Index i = 0; i < 2; ++i) {
      const double z = data.labels(i) * predict_margin(fit.model, data.features.row(i).transpose());
      CHECK(z >= 2 * std::log(2.0) - 1e-2);
    }
    const auto grid = oracle::grid_minimum({{-1.0, 1.0}, {-1, 1}, {0.5}, 0.01}, 1e-2);
    CHECK(fit.objective <= grid.value + 1e-3);
  }

  TEST_CASE("one-class data pushes the intercept positive") {
    const auto data = sample_1d({{-1.0, 1}, {0.3, 1}, {2.0, 1}});
    const auto fit = fit_piecewise(data, kHalf, 0.1);
    CHECK(fit.model.b > 0);
    for (Eigen::Index i = 0; i < data.size(); ++i)
      CHECK(predict_margin(fit.model, data.features.row(i).transpose()) > 0);
  }

  TEST_CASE("never worse than the starting point, and deterministic") {
    std::mt19937_64 rng(43);
    for (int t = 0; t < 10; ++t) {
      const auto data = generate_setting(SettingId(1, 1 + t % 3), 60, 3, CounterRng(static_cast<std::uint64_t>(t)));
      const auto spec = logistic_surrogate(designated_boundaries(SettingId(1, 1 + t % 3)));
      const double lambda = std::ldexp(1.0, -8 + t);
      SolverConfig cfg;
      cfg.max_iterations = 3000;
      const auto a = fit_piecewise(data, spec, lambda, cfg);
      const auto b = fit_piecewise(data, spec, lambda, cfg);
      CHECK(a.objective <= objective(data, LinearModel<double>::zero(3), spec, lambda) + 1e-6);
      CHECK(a.model.w == b.model.w);
      CHECK(a.model.b == b.model.b);
      CHECK(a.iterations == b.iterations);
    }
  }

  TEST_CASE("every iterate stays inside the projection ball") {
    const auto data = generate_setting(SettingId(1, 3), 40, 2, CounterRng(5));
    const auto spec = logistic_surrogate(designated_boundaries(SettingId(1, 3)));
    for (double lambda : {1e-4, 0.01, 1.0, 64.0}) {
      const double radius = 1 / std::sqrt(lambda);
      double worst = 0;
      SolverConfig cfg;
      cfg.max_iterations = 2000;
      fit_piecewise(data, spec, lambda, cfg, [&](std::size_t, const LinearModel<double>& m) {
        worst = std::max(worst, m.norm() - radius);
      });
      CHECK(worst <= 0.0);
    }
  }

  TEST_CASE("matches the exhaustive grid and admits a near-zero subgradient") {
    std::mt19937_64 rng(47);
    for (int t = 0; t < 4; ++t) {
      const auto inst = oracle::random_instance(rng);
      const auto fit = fit_piecewise(oracle::to_sample(inst), logistic_surrogate(Boundaries<double>(inst.pi)),
                                     inst.lambda);
      const auto grid = oracle::grid_minimum(inst);
      CHECK(std::abs(fit.objective - grid.value) <= 1e-3);
      CHECK(oracle::certificate_norm(inst, fit.model.w(0), fit.model.b) < 1e-2);
    }
  }

  TEST_CASE("invalid penalties are configuration errors") {
    const auto data = sample_1d({{1.0, 1}});
    CHECK_THROWS_AS(fit_piecewise(data, kHalf, 0.0), ConfigError);
    CHECK_THROWS_AS(fit_piecewise(data, kHalf, -1.0), ConfigError);
    SolverConfig bad;
    bad.rel_tolerance = 0;
    CHECK_THROWS_AS(fit_piecewise(data, kHalf, 1.0, bad), ConfigError);
    bad = {};
    bad.max_iterations = 0;
    CHECK_THROWS_AS(fit_piecewise(data, kHalf, 1.0, bad), ConfigError);
  }

  TEST_CASE("last iterate is returned when averaging is off") {
    const auto data = sample_1d({{-1.0, -1}, {1.0, 1}, {0.2, -1}});
    SolverConfig cfg;
    cfg.averaging = false;
    cfg.max_iterations = 50;
    LinearModel<double> last;
    const auto fit = fit_piecewise(data, kHalf, 0.5, cfg, [&](std::size_t, const LinearModel<double>& m) { last = m; });
    CHECK(fit.model.w == last.w);
    CHECK(fit.model.b == last.b);
  }

  TEST_CASE("recovers the Bayes rule on a large sample") {
    // setting 1.1 without rotation: p(x) is 1/4 left of zero and 3/4 right of it
    const auto rng = CounterRng(2024);
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(2, 2);
    const auto train = generate_setting(SettingId(1, 1), 5000, identity, rng.substream(1));
    const auto test = generate_setting(SettingId(1, 1), 5000, identity, rng.substream(2));
    const Boundaries<double> pi{0.5};
    SolverConfig cfg;
    cfg.max_iterations = 20000;
    const auto fit = fit_piecewise(train, kHalf, 1e-4, cfg);
    Eigen::Index agree = 0;
    for (Eigen::Index i = 0; i < test.size(); ++i) {
      const double f = predict_margin(fit.model, test.features.row(i).transpose());
      agree += predict_interval(f, kHalf) == interval_index((*test.true_probs)(i), pi);
    }
    CHECK(static_cast<double>(agree) / static_cast<double>(test.size()) >= 0.97);
  }
}

TEST_SUITE("fit_logistic") {
  TEST_CASE("symmetric data gives a near-zero intercept") {
    const auto data = sample_1d({{-2.0, -1}, {-1.0, -1}, {-0.5, 1}, {0.5, -1}, {1.0, 1}, {2.0, 1}});
    const auto fit = fit_logistic(data, 0.1);
    CHECK(std::abs(fit.model.b) < 0.05);
  }

  TEST_CASE("single point matches a grid search") {
    const auto data = sample_1d({{1.0, 1}});
    const auto fit = fit_logistic(data, 1.0);
    double best = INFINITY, bw = 0, bb = 0;
    for (double w = -1; w <= 1; w += 1e-3)
      for (double b = -1; b <= 1; b += 1e-3) {
        if (w * w + b * b > 1) continue;
        const double v = std::log1p(std::exp(-(w + b))) + 0.5 * w * w;
        if (v < best) {
          best = v;
          bw = w;
          bb = b;
        }
      }
    CHECK(std::abs(fit.model.w(0) - bw) < 1e-2);
    CHECK(std::abs(fit.model.b - bb) < 1e-2);
    CHECK(fit.objective <= best + 1e-6);
  }

  TEST_CASE("probabilities lie strictly inside (0,1)") {
    const auto data = generate_setting(SettingId(2, 1), 200, 3, CounterRng(9));
    const auto fit = fit_logistic(data, 0.05);
    const Eigen::VectorXd f = predict_margins(fit.model, data.features);
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      CHECK(sigmoid(f(i)) > 0.0);
      CHECK(sigmoid(f(i)) < 1.0);
    }
  }
}
