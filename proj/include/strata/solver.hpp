#pragma once

// Projected sub-gradient descent for
//   (1/n) sum_i phi^{y_i}(y_i (<w, x_i> + b)) + (lambda/2) ||w||^2
// with step size 1/(lambda m) and projection of [w, b] onto the ball of radius
// lambda^{-1/2}. The same iteration drives the logistic baseline.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <type_traits>

#include <Eigen/Dense>

#include "strata/core.hpp"
#include "strata/errors.hpp"
#include "strata/surrogate.hpp"

namespace strata {

template <typename Scalar = double>
struct LinearModel {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector w;
  Scalar b = 0;

  LinearModel() = default;
  LinearModel(Vector weights, Scalar intercept) : w(std::move(weights)), b(intercept) {}
  static LinearModel zero(Eigen::Index p) { return {Vector::Zero(p), Scalar(0)}; }

  Eigen::Index dim() const { return w.size(); }
  /// ||[w, b]||_2
  Scalar norm() const { return std::sqrt(w.squaredNorm() + b * b); }
};

struct SolverConfig {
  std::size_t max_iterations = 100000;
  double rel_tolerance = 1e-8;
  std::size_t check_interval = 100;
  bool averaging = true;

  void validate() const {
    if (max_iterations < 1) throw ConfigError("solver: max_iterations must be >= 1");
    if (!(rel_tolerance > 0)) throw ConfigError("solver: rel_tolerance must be > 0");
    if (check_interval < 1) throw ConfigError("solver: check_interval must be >= 1");
  }
};

template <typename Scalar = double>
struct FitResult {
  LinearModel<Scalar> model;
  std::size_t iterations = 0;
  bool converged = false;
  Scalar objective = 0;
};

/// Called after every projected update with the iteration number and the
/// current (not averaged) iterate.
template <typename Scalar = double>
using IterationObserver = std::function<void(std::size_t, const LinearModel<Scalar>&)>;

template <typename Scalar, typename Derived>
Scalar predict_margin(const LinearModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != model.dim())
    throw ConfigError("predict_margin: feature dimension " + std::to_string(x.size()) +
                      " does not match model dimension " + std::to_string(model.dim()));
  return model.w.dot(x.derived().template cast<Scalar>()) + model.b;
}

/// Margins f(x_i) for every row of a feature matrix.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> predict_margins(
    const LinearModel<Scalar>& model,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& features) {
  if (features.cols() != model.dim())
    throw ConfigError("predict_margins: feature dimension " + std::to_string(features.cols()) +
                      " does not match model dimension " + std::to_string(model.dim()));
  return (features * model.w).array() + model.b;
}

template <typename Scalar>
IntervalIndex predict_interval(Scalar f, const SurrogateSpec<Scalar>& spec) {
  return predict_interval(f, spec.deltas());
}

template <typename Scalar>
Scalar logistic_loss(Scalar z) {
  // log(1 + e^{-z}) without overflow for large |z|
  return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

/// d/dz log(1 + e^{-z}) = -1 / (1 + e^{z})
template <typename Scalar>
Scalar logistic_loss_derivative(Scalar z) {
  if (z > 0) {
    const Scalar e = std::exp(-z);
    return -e / (Scalar(1) + e);
  }
  return Scalar(-1) / (Scalar(1) + std::exp(z));
}

namespace detail {

template <typename Scalar>
void check_fit_inputs(const LabeledSample<Scalar>& data, Scalar lambda) {
  if (!(lambda > 0) || !std::isfinite(static_cast<double>(lambda)))
    throw ConfigError("lambda must be a finite positive number");
  if (data.size() < 1) throw ConfigError("fit: need at least one observation");
}

template <typename Scalar>
void check_dims(const LabeledSample<Scalar>& data, const LinearModel<Scalar>& model) {
  if (data.dim() != model.dim())
    throw ConfigError("dimension mismatch: data has " + std::to_string(data.dim()) +
                      " features, model has " + std::to_string(model.dim()));
}

/// Penalized empirical risk for an arbitrary margin loss.
template <typename Scalar, typename Loss>
Scalar penalized_risk(const LabeledSample<Scalar>& data, const LinearModel<Scalar>& model,
                      Scalar lambda, Loss&& loss) {
  check_dims(data, model);
  const auto f = predict_margins(model, data.features);
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Label y = label_from_int(data.labels(i));
    sum += loss(y, Scalar(to_int(y)) * f(i));
  }
  return sum / Scalar(data.size()) + lambda / Scalar(2) * model.w.squaredNorm();
}

/// Shared projected sub-gradient loop. `slope(y, z)` is a (sub)derivative of
/// the margin loss; `objective(model)` is used by the stopping rule.
template <typename Scalar, typename Slope, typename Objective>
FitResult<Scalar> projected_descent(const LabeledSample<Scalar>& data, Scalar lambda,
                                    const SolverConfig& config, Slope&& slope,
                                    Objective&& objective, const IterationObserver<Scalar>& observer) {
  check_fit_inputs(data, lambda);
  config.validate();
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  const Eigen::Index n = data.size();
  const Scalar radius = Scalar(1) / std::sqrt(lambda);
  const Vector y = data.labels.template cast<Scalar>();

  LinearModel<Scalar> cur = LinearModel<Scalar>::zero(data.dim());
  LinearModel<Scalar> avg = cur;
  Vector coef(n);

  FitResult<Scalar> result;
  Scalar previous = std::numeric_limits<Scalar>::quiet_NaN();
  std::size_t m = 1;
  for (; m <= config.max_iterations; ++m) {
    const Vector margins = y.array() * ((data.features * cur.w).array() + cur.b);
    for (Eigen::Index i = 0; i < n; ++i)
      coef(i) = slope(data.labels(i) > 0 ? Label::positive : Label::negative, margins(i)) * y(i);
    coef /= Scalar(n);

    const Scalar eta = Scalar(1) / (lambda * Scalar(m));
    cur.w -= eta * (lambda * cur.w + data.features.transpose() * coef);
    cur.b -= eta * coef.sum();

    const Scalar norm = cur.norm();
    if (!std::isfinite(static_cast<double>(norm))) throw NumericError("fit: non-finite iterate");
    if (norm > radius) {
      const Scalar scale = radius / norm;
      cur.w *= scale;
      cur.b *= scale;
      // rounding can leave the rescaled point an ulp outside the ball
      while (cur.norm() > radius) {
        cur.w *= Scalar(1) - std::numeric_limits<Scalar>::epsilon();
        cur.b *= Scalar(1) - std::numeric_limits<Scalar>::epsilon();
      }
    }
    if (observer) observer(m, cur);

    if (config.averaging) {
      const Scalar t = Scalar(1) / Scalar(m);
      avg.w += t * (cur.w - avg.w);
      avg.b += t * (cur.b - avg.b);
    }

    if (m % config.check_interval == 0) {
      const Scalar obj = objective(config.averaging ? avg : cur);
      if (std::isfinite(static_cast<double>(previous)) &&
          std::abs(obj - previous) <=
              Scalar(config.rel_tolerance) * std::max(std::abs(previous), std::numeric_limits<Scalar>::min())) {
        result.converged = true;
        break;
      }
      previous = obj;
    }
  }
  result.iterations = std::min(m, config.max_iterations);
  result.model = config.averaging ? avg : cur;
  result.objective = objective(result.model);
  return result;
}

}  // namespace detail

/// Penalized empirical surrogate risk; the intercept is not penalized.
template <typename Scalar>
Scalar objective(const LabeledSample<Scalar>& data, const LinearModel<Scalar>& model,
                 const SurrogateSpec<Scalar>& spec, Scalar lambda) {
  if (!(lambda > 0)) throw ConfigError("objective: lambda must be positive");
  return detail::penalized_risk(data, model, lambda,
                                [&](Label y, Scalar z) { return eval_surrogate(spec, y, z); });
}

template <typename Scalar>
Scalar logistic_objective(const LabeledSample<Scalar>& data, const LinearModel<Scalar>& model,
                          Scalar lambda) {
  if (!(lambda > 0)) throw ConfigError("objective: lambda must be positive");
  return detail::penalized_risk(data, model, lambda,
                                [](Label, Scalar z) { return logistic_loss(z); });
}

/// Deterministic full-batch fit with a piecewise linear surrogate, starting at w = 0, b = 0.
template <typename Scalar>
FitResult<Scalar> fit_piecewise(const LabeledSample<Scalar>& data, const SurrogateSpec<Scalar>& spec,
                                Scalar lambda, const SolverConfig& config = {},
                                const std::type_identity_t<IterationObserver<Scalar>>& observer = {}) {
  detail::check_fit_inputs(data, lambda);
  return detail::projected_descent(
      data, lambda, config, [&](Label y, Scalar z) { return subgradient(spec, y, z); },
      [&](const LinearModel<Scalar>& m) { return objective(data, m, spec, lambda); }, observer);
}

/// Logistic regression baseline through the same projected iteration.
template <typename Scalar>
FitResult<Scalar> fit_logistic(const LabeledSample<Scalar>& data, Scalar lambda,
                               const SolverConfig& config = {},
                               const IterationObserver<Scalar>& observer = {}) {
  detail::check_fit_inputs(data, lambda);
  return detail::projected_descent(
      data, lambda, config, [](Label, Scalar z) { return logistic_loss_derivative(z); },
      [&](const LinearModel<Scalar>& m) { return logistic_objective(data, m, lambda); }, observer);
}

template <typename Scalar>
Scalar sigmoid(Scalar f) {
  return f >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-f)) : std::exp(f) / (Scalar(1) + std::exp(f));
}

}  // namespace strata
