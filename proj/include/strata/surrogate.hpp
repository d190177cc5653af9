#pragma once

// Piecewise linear convex surrogates phi^Y(z) = max{0, A^Y(pi_k) + B^Y(pi_k) z},
// one affine segment per boundary, and the checks that make them minimally
// consistent for a given set of boundaries.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "strata/core.hpp"
#include "strata/errors.hpp"

namespace strata {

template <typename Scalar = double>
struct Segment {
  Scalar intercept;
  Scalar slope;

  Scalar operator()(Scalar z) const { return intercept + slope * z; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Intercepts and slopes of the pi-consistent segment pair for one boundary.
template <typename Scalar = double>
struct SegmentParams {
  Scalar pos_intercept;
  Scalar pos_slope;
  Scalar neg_intercept;
  Scalar neg_slope;

  friend bool operator==(const SegmentParams&, const SegmentParams&) = default;
};

/// Tangent lines to log(1 + e^{-z}) at z = +-log(pi/(1-pi)):
/// A+(pi) = A-(1-pi) = -pi log pi - (1-pi) log(1-pi), B+(pi) = B-(1-pi) = -(1-pi).
template <typename Scalar>
SegmentParams<Scalar> logistic_params(Scalar pi) {
  if (!std::isfinite(static_cast<double>(pi)) || !(pi > 0) || !(pi < 1))
    throw DomainError("logistic_params: pi must lie in (0,1)");
  auto entropy = [](Scalar q) { return -q * std::log(q) - (Scalar(1) - q) * std::log(Scalar(1) - q); };
  return {entropy(pi), -(Scalar(1) - pi), entropy(Scalar(1) - pi), -pi};
}

template <typename Scalar>
std::vector<SegmentParams<Scalar>> logistic_param_table(const Boundaries<Scalar>& pi) {
  std::vector<SegmentParams<Scalar>> table;
  table.reserve(pi.size());
  for (Scalar v : pi.values()) table.push_back(logistic_params(v));
  return table;
}

/// Outcome of checking the sufficient conditions for minimal consistency and
/// the consistency equation at each threshold. Indices are 1-based boundary
/// indices k, matching pi_1..pi_K.
template <typename Scalar = double>
struct ConsistencyReport {
  bool c1_ok = true;
  bool c2_ok = true;
  bool c3_ok = true;
  std::vector<Scalar> threshold_residuals;
  std::vector<std::size_t> violating_indices;

  bool ok() const { return c1_ok && c2_ok && c3_ok; }
};

template <typename Scalar = double>
class SurrogateError : public ConfigError {
 public:
  SurrogateError(const std::string& what, ConsistencyReport<Scalar> report)
      : ConfigError(what), report_(std::move(report)) {}
  const ConsistencyReport<Scalar>& report() const { return report_; }

 private:
  ConsistencyReport<Scalar> report_;
};

/// A piecewise linear surrogate pair together with its consistency thresholds
/// delta_k and hinge points H_0 < ... < H_K on the margin axis.
///
/// The constructor checks shapes only; use build_surrogate for a spec that is
/// guaranteed consistent, or check_consistency on one assembled by hand.
template <typename Scalar = double>
class SurrogateSpec {
 public:
  SurrogateSpec(Boundaries<Scalar> boundaries, std::vector<Segment<Scalar>> pos,
                std::vector<Segment<Scalar>> neg, std::vector<Scalar> deltas,
                std::vector<Scalar> hinges)
      : boundaries_(std::move(boundaries)),
        pos_(std::move(pos)),
        neg_(std::move(neg)),
        deltas_(std::move(deltas)),
        hinges_(std::move(hinges)) {
    const std::size_t K = boundaries_.size();
    if (pos_.size() != K || neg_.size() != K || deltas_.size() != K || hinges_.size() != K + 1)
      throw ConfigError("surrogate: expected K segments per class, K thresholds and K+1 hinges");
  }

  std::size_t size() const { return boundaries_.size(); }
  const Boundaries<Scalar>& boundaries() const { return boundaries_; }
  std::span<const Segment<Scalar>> segments(Label y) const {
    return y == Label::positive ? std::span<const Segment<Scalar>>(pos_)
                                : std::span<const Segment<Scalar>>(neg_);
  }
  std::span<const Segment<Scalar>> pos_segments() const { return pos_; }
  std::span<const Segment<Scalar>> neg_segments() const { return neg_; }
  std::span<const Scalar> deltas() const { return deltas_; }
  std::span<const Scalar> hinges() const { return hinges_; }

 private:
  Boundaries<Scalar> boundaries_;
  std::vector<Segment<Scalar>> pos_;
  std::vector<Segment<Scalar>> neg_;
  std::vector<Scalar> deltas_;
  std::vector<Scalar> hinges_;
};

enum class ThresholdRule {
  automatic,         ///< logistic tangent points for logistic tables, hinge midpoints otherwise
  logistic_tangent,  ///< delta_k = log(pi_k / (1 - pi_k))
  hinge_midpoint,    ///< delta_k = (H_{k-1} + H_k) / 2
};

namespace detail {

inline constexpr double kConsistencyTol = 1e-9;
inline constexpr double kTieRelTol = 1e-12;

/// Margin location where segment a meets segment b.
template <typename Scalar>
Scalar crossing(const Segment<Scalar>& a, const Segment<Scalar>& b) {
  return (a.intercept - b.intercept) / (b.slope - a.slope);
}

/// Hinges on the positive-class margin axis: H_0 is the negative loss's zero
/// crossing mapped through z -> -z, H_K the positive loss's zero crossing, and
/// the interior hinges are the crossings of consecutive positive segments.
template <typename Scalar>
std::vector<Scalar> hinge_points(std::span<const Segment<Scalar>> pos,
                                 std::span<const Segment<Scalar>> neg) {
  const std::size_t K = pos.size();
  std::vector<Scalar> h(K + 1);
  h[0] = neg[0].intercept / neg[0].slope;
  for (std::size_t k = 1; k < K; ++k) h[k] = crossing(pos[k - 1], pos[k]);
  h[K] = -pos[K - 1].intercept / pos[K - 1].slope;
  return h;
}

template <typename Scalar>
bool near(Scalar a, Scalar b, Scalar rel) {
  return std::abs(a - b) <= rel * std::max<Scalar>(Scalar(1), std::max(std::abs(a), std::abs(b)));
}

/// Derivative of max{0, segments} at z when it exists and a segment is active.
template <typename Scalar>
std::optional<Scalar> unique_active_slope(std::span<const Segment<Scalar>> segs, Scalar z) {
  Scalar best = 0;
  for (const auto& s : segs) best = std::max(best, s(z));
  std::optional<Scalar> slope;
  if (near(best, Scalar(0), Scalar(kTieRelTol))) return std::nullopt;
  for (const auto& s : segs) {
    if (near(s(z), best, Scalar(kTieRelTol))) {
      if (slope && !near(*slope, s.slope, Scalar(kTieRelTol))) return std::nullopt;
      slope = s.slope;
    }
  }
  return slope;
}

template <typename Scalar>
void flag(ConsistencyReport<Scalar>& r, std::size_t k) {
  if (std::find(r.violating_indices.begin(), r.violating_indices.end(), k) ==
      r.violating_indices.end())
    r.violating_indices.push_back(k);
}

}  // namespace detail

template <typename Scalar>
ConsistencyReport<Scalar> check_consistency(const SurrogateSpec<Scalar>& spec) {
  using detail::flag;
  const Scalar tol = Scalar(detail::kConsistencyTol);
  const std::size_t K = spec.size();
  const auto& pi = spec.boundaries();
  const auto pos = spec.pos_segments();
  const auto neg = spec.neg_segments();
  const auto deltas = spec.deltas();
  const auto stored = spec.hinges();
  ConsistencyReport<Scalar> r;

  // (C1): negative slopes, B+ non-decreasing, B- non-increasing.
  for (std::size_t k = 0; k < K; ++k) {
    if (!(pos[k].slope < 0) || !(neg[k].slope < 0)) {
      r.c1_ok = false;
      flag(r, k + 1);
    }
    if (k > 0 && (pos[k].slope < pos[k - 1].slope || neg[k].slope > neg[k - 1].slope)) {
      r.c1_ok = false;
      flag(r, k + 1);
    }
  }

  // (C2): hinge alignment between classes and hinge ordering, with the outer
  // hinges taken as the zero crossings H_0 < ... < H_K.
  const auto h = detail::hinge_points(pos, neg);
  for (std::size_t k = 1; k < K; ++k) {
    const Scalar h_pos = detail::crossing(pos[k - 1], pos[k]);
    const Scalar h_neg = detail::crossing(neg[k - 1], neg[k]);
    if (!(std::abs(-h_neg - h_pos) <= tol * std::max<Scalar>(1, std::abs(h_pos)))) {
      r.c2_ok = false;
      flag(r, k + 1);
    }
  }
  for (std::size_t j = 0; j <= K; ++j) {
    if (!std::isfinite(static_cast<double>(h[j])) || (j > 0 && !(h[j] > h[j - 1]))) {
      r.c2_ok = false;
      flag(r, std::max<std::size_t>(j, 1));
    }
    if (!(std::abs(stored[j] - h[j]) <= tol * std::max<Scalar>(1, std::abs(h[j])))) {
      r.c2_ok = false;
      flag(r, std::max<std::size_t>(j, 1));
    }
  }
  for (std::size_t k = 1; k <= K; ++k) {
    if (!(deltas[k - 1] > h[k - 1] && deltas[k - 1] < h[k])) {
      r.c2_ok = false;
      flag(r, k);
    }
  }

  // (C3) and the consistency equation at delta_k.
  r.threshold_residuals.resize(K);
  for (std::size_t k = 1; k <= K; ++k) {
    const Scalar bp = pos[k - 1].slope;
    const Scalar bn = neg[k - 1].slope;
    if (!(std::abs(bn / (bn + bp) - pi[k]) <= tol)) {
      r.c3_ok = false;
      flag(r, k);
    }
    const auto dpos = detail::unique_active_slope(pos, deltas[k - 1]);
    const auto dneg = detail::unique_active_slope(neg, -deltas[k - 1]);
    Scalar residual = std::numeric_limits<Scalar>::quiet_NaN();
    if (dpos && dneg && *dpos < 0 && *dneg < 0) residual = *dneg / (*dneg + *dpos) - pi[k];
    r.threshold_residuals[k - 1] = residual;
    if (!(std::abs(residual) <= tol)) {
      r.c3_ok = false;
      flag(r, k);
    }
  }
  std::sort(r.violating_indices.begin(), r.violating_indices.end());
  return r;
}

/// Assembles segments, hinge points and thresholds from a per-boundary table
/// and rejects any table that is not minimally consistent.
template <typename Scalar>
SurrogateSpec<Scalar> build_surrogate(const Boundaries<Scalar>& pi,
                                      std::span<const SegmentParams<Scalar>> params,
                                      ThresholdRule rule = ThresholdRule::automatic) {
  const std::size_t K = pi.size();
  if (params.size() != K)
    throw ConfigError("build_surrogate: expected " + std::to_string(K) + " parameter rows, got " +
                      std::to_string(params.size()));
  std::vector<Segment<Scalar>> pos, neg;
  pos.reserve(K);
  neg.reserve(K);
  for (const auto& row : params) {
    if (!(row.pos_slope < 0) || !(row.neg_slope < 0))
      throw ConfigError("build_surrogate: segment slopes must be strictly negative");
    pos.push_back({row.pos_intercept, row.pos_slope});
    neg.push_back({row.neg_intercept, row.neg_slope});
  }
  auto hinges = detail::hinge_points<Scalar>(pos, neg);

  if (rule == ThresholdRule::automatic) {
    bool logistic = true;
    for (std::size_t k = 0; k < K && logistic; ++k) logistic = params[k] == logistic_params(pi[k + 1]);
    rule = logistic ? ThresholdRule::logistic_tangent : ThresholdRule::hinge_midpoint;
  }
  std::vector<Scalar> deltas(K);
  for (std::size_t k = 1; k <= K; ++k) {
    deltas[k - 1] = rule == ThresholdRule::logistic_tangent
                        ? std::log(pi[k] / (Scalar(1) - pi[k]))
                        : (hinges[k - 1] + hinges[k]) / Scalar(2);
  }

  SurrogateSpec<Scalar> spec(pi, std::move(pos), std::move(neg), std::move(deltas), std::move(hinges));
  auto report = check_consistency(spec);
  if (!report.ok()) {
    std::string which;
    for (auto k : report.violating_indices) which += (which.empty() ? "" : ",") + std::to_string(k);
    throw SurrogateError<Scalar>("build_surrogate: parameters are not minimally consistent (k=" +
                                     which + ")",
                                 std::move(report));
  }
  return spec;
}

template <typename Scalar>
SurrogateSpec<Scalar> build_surrogate(const Boundaries<Scalar>& pi,
                                      const std::vector<SegmentParams<Scalar>>& params,
                                      ThresholdRule rule = ThresholdRule::automatic) {
  return build_surrogate(pi, std::span<const SegmentParams<Scalar>>(params), rule);
}

template <typename Scalar>
SurrogateSpec<Scalar> logistic_surrogate(const Boundaries<Scalar>& pi) {
  return build_surrogate(pi, logistic_param_table(pi), ThresholdRule::logistic_tangent);
}

template <typename Scalar>
Scalar eval_surrogate(const SurrogateSpec<Scalar>& spec, Label y, Scalar z) {
  if (!std::isfinite(static_cast<double>(z))) throw DomainError("eval_surrogate: non-finite margin");
  Scalar best = 0;
  for (const auto& s : spec.segments(y)) best = std::max(best, s(z));
  return best;
}

/// Slope of the active piece at z (0 on the flat branch). Where pieces tie,
/// the flattest one is returned, i.e. the right derivative.
template <typename Scalar>
Scalar subgradient(const SurrogateSpec<Scalar>& spec, Label y, Scalar z) {
  if (!std::isfinite(static_cast<double>(z))) throw DomainError("subgradient: non-finite margin");
  const auto segs = spec.segments(y);
  Scalar best = 0;
  for (const auto& s : segs) best = std::max(best, s(z));
  const Scalar tol = Scalar(detail::kTieRelTol) * std::max<Scalar>(Scalar(1), std::abs(best));
  Scalar slope = best <= tol ? Scalar(0) : -std::numeric_limits<Scalar>::infinity();
  for (const auto& s : segs)
    if (best - s(z) <= tol) slope = std::max(slope, s.slope);
  return slope;
}

/// Excess-risk constant max_{k,j} -pi_k / (B-(pi_k) |delta_k - H_j|).
template <typename Scalar>
Scalar risk_constant(const SurrogateSpec<Scalar>& spec) {
  if (!check_consistency(spec).ok()) throw ConfigError("risk_constant: spec is not consistent");
  const auto& pi = spec.boundaries();
  Scalar c = 0;
  for (std::size_t k = 1; k <= spec.size(); ++k) {
    const Scalar delta = spec.deltas()[k - 1];
    const Scalar slope = spec.neg_segments()[k - 1].slope;
    for (Scalar h : spec.hinges()) {
      const Scalar dist = std::abs(delta - h);
      if (dist == 0) throw NumericError("risk_constant: threshold coincides with a hinge");
      c = std::max(c, -pi[k] / (slope * dist));
    }
  }
  return c;
}

}  // namespace strata
