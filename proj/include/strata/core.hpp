#pragma once

// Probability-boundary partitions of [0,1], the averaged weighted 0-1 loss
// over those partitions, and the Bayes rule it induces.

#include <cmath>
#include <compare>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "strata/errors.hpp"

namespace strata {

enum class Label : int { negative = -1, positive = +1 };

inline Label label_from_int(int y) {
  if (y == 1) return Label::positive;
  if (y == -1) return Label::negative;
  throw DomainError("label must be -1 or +1, got " + std::to_string(y));
}

inline int to_int(Label y) { return static_cast<int>(y); }

/// Index k of the interval omega_k in the partition {omega_0, ..., omega_K}, where
/// omega_0 = [0, pi_1] and omega_k = (pi_k, pi_{k+1}] for k >= 1.
struct IntervalIndex {
  std::size_t value = 0;
  friend constexpr auto operator<=>(IntervalIndex, IntervalIndex) = default;
};

/// Ordered probability thresholds 0 < pi_1 < ... < pi_K < 1.
template <typename Scalar = double>
class Boundaries {
 public:
  static constexpr double kMinGap = 1e-12;

  explicit Boundaries(std::vector<Scalar> values) : values_(std::move(values)) {
    if (values_.empty()) throw ConfigError("boundaries: need at least one value");
    for (std::size_t k = 0; k < values_.size(); ++k) {
      const Scalar v = values_[k];
      if (!std::isfinite(static_cast<double>(v)) || !(v > 0) || !(v < 1))
        throw ConfigError("boundaries: value " + std::to_string(static_cast<double>(v)) +
                          " outside (0,1)");
      if (k > 0 && !(v - values_[k - 1] > Scalar(kMinGap)))
        throw ConfigError("boundaries: values must be strictly increasing with gap > 1e-12");
    }
  }

  Boundaries(std::initializer_list<Scalar> values) : Boundaries(std::vector<Scalar>(values)) {}

  std::size_t size() const { return values_.size(); }
  /// pi_k for k in 1..K; pi_0 = 0 and pi_{K+1} = 1 are implicit.
  Scalar operator[](std::size_t k) const {
    if (k == 0) return Scalar(0);
    if (k > values_.size()) return Scalar(1);
    return values_[k - 1];
  }
  std::span<const Scalar> values() const { return values_; }

  /// Lower/upper probability endpoints of omega_k.
  std::pair<Scalar, Scalar> interval(IntervalIndex k) const {
    return {(*this)[k.value], (*this)[k.value + 1]};
  }

  friend bool operator==(const Boundaries&, const Boundaries&) = default;

 private:
  std::vector<Scalar> values_;
};

/// Covariate matrix (n x p), labels in {-1,+1}, and optionally the true
/// conditional probabilities p(x_i) when they are known.
template <typename Scalar = double>
struct LabeledSample {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix features;
  Eigen::VectorXi labels;
  std::optional<Vector> true_probs;

  LabeledSample() = default;
  LabeledSample(Matrix x, Eigen::VectorXi y, std::optional<Vector> probs = std::nullopt)
      : features(std::move(x)), labels(std::move(y)), true_probs(std::move(probs)) {
    validate();
  }

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  Label label(Eigen::Index i) const { return label_from_int(labels(i)); }

  void validate() const {
    if (labels.size() != features.rows())
      throw ConfigError("sample: label count does not match feature rows");
    for (Eigen::Index i = 0; i < labels.size(); ++i) label_from_int(labels(i));
    if (!features.allFinite()) throw DomainError("sample: non-finite feature value");
    if (true_probs) {
      if (true_probs->size() != features.rows())
        throw ConfigError("sample: true_prob count does not match feature rows");
      for (Eigen::Index i = 0; i < true_probs->size(); ++i) {
        const Scalar p = (*true_probs)(i);
        if (!(p >= 0 && p <= 1)) throw DomainError("sample: true_prob outside [0,1]");
      }
    }
  }
};

namespace detail {

template <typename Scalar>
void require_probability(Scalar p) {
  if (!std::isfinite(static_cast<double>(p)) || p < 0 || p > 1)
    throw DomainError("probability must lie in [0,1], got " + std::to_string(static_cast<double>(p)));
}

template <typename Scalar>
void require_interval(IntervalIndex k, const Boundaries<Scalar>& pi) {
  if (k.value > pi.size())
    throw DomainError("interval index " + std::to_string(k.value) + " exceeds K=" +
                      std::to_string(pi.size()));
}

template <typename Scalar>
void require_increasing_thresholds(std::span<const Scalar> deltas, std::size_t expected) {
  if (deltas.size() != expected)
    throw ConfigError("thresholds: expected " + std::to_string(expected) + " values, got " +
                      std::to_string(deltas.size()));
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    if (!std::isfinite(static_cast<double>(deltas[k])))
      throw ConfigError("thresholds: non-finite value");
    if (k > 0 && !(deltas[k] > deltas[k - 1]))
      throw ConfigError("thresholds: must be strictly increasing");
  }
}

}  // namespace detail

/// The interval of the partition containing p. Ties p == pi_k go to omega_{k-1}.
template <typename Scalar>
IntervalIndex interval_index(Scalar p, const Boundaries<Scalar>& pi) {
  detail::require_probability(p);
  std::size_t k = 0;
  for (Scalar v : pi.values())
    if (v < p) ++k;
  return {k};
}

/// Averaged weighted 0-1 loss of predicting omega_k for an observation with label y.
/// Positive: (2/K) sum over boundaries above the interval of (1 - pi_j).
/// Negative: (2/K) sum over boundaries at or below the interval of pi_j.
template <typename Scalar>
Scalar theoretical_loss(Label y, IntervalIndex k, const Boundaries<Scalar>& pi) {
  detail::require_interval(k, pi);
  const std::size_t K = pi.size();
  Scalar sum = 0;
  if (y == Label::positive) {
    for (std::size_t j = k.value + 1; j <= K; ++j) sum += Scalar(1) - pi[j];
  } else {
    for (std::size_t j = 1; j <= k.value; ++j) sum += pi[j];
  }
  return Scalar(2) * sum / Scalar(K);
}

inline double theoretical_loss(int y, IntervalIndex k, const Boundaries<double>& pi) {
  return theoretical_loss(label_from_int(y), k, pi);
}

/// Independent oracle for the Bayes rule: minimizes the conditional expected
/// loss by enumerating every interval. Ties resolve to the smallest index.
template <typename Scalar>
IntervalIndex brute_force_bayes(Scalar p, const Boundaries<Scalar>& pi) {
  detail::require_probability(p);
  IntervalIndex best{0};
  Scalar best_risk = std::numeric_limits<Scalar>::infinity();
  for (std::size_t k = 0; k <= pi.size(); ++k) {
    const IntervalIndex cand{k};
    const Scalar risk = p * theoretical_loss(Label::positive, cand, pi) +
                        (Scalar(1) - p) * theoretical_loss(Label::negative, cand, pi);
    if (risk < best_risk) {
      best_risk = risk;
      best = cand;
    }
  }
  return best;
}

/// Margin-axis prediction rule: the interval k with f in (delta_k, delta_{k+1}],
/// taking delta_0 = -inf and delta_{K+1} = +inf. Equivalently the count of
/// thresholds strictly below f.
template <typename Scalar>
IntervalIndex predict_interval(Scalar f, std::type_identity_t<std::span<const Scalar>> deltas) {
  std::size_t k = 0;
  for (Scalar d : deltas)
    if (d < f) ++k;
  return {k};
}

/// The theoretical loss written over the functional margin y*f.
template <typename Scalar>
Scalar margin_theoretical_loss(Label y, Scalar f, const Boundaries<Scalar>& pi,
                               std::type_identity_t<std::span<const Scalar>> deltas) {
  detail::require_increasing_thresholds(deltas, pi.size());
  const std::size_t K = pi.size();
  const Scalar z = Scalar(to_int(y)) * f;
  Scalar sum = 0;
  for (std::size_t k = 1; k <= K; ++k) {
    const Scalar d = deltas[k - 1];
    if (y == Label::positive) {
      if (z <= d) sum += Scalar(1) - pi[k];
    } else {
      if (z < -d) sum += pi[k];
    }
  }
  return Scalar(2) * sum / Scalar(K);
}

/// Limit of the theoretical loss as the boundaries become dense: (I{y=+1} - g)^2.
template <typename Scalar>
Scalar soft_limit_loss(Label y, Scalar g) {
  detail::require_probability(g);
  const Scalar target = y == Label::positive ? Scalar(1) : Scalar(0);
  return (target - g) * (target - g);
}

}  // namespace strata
