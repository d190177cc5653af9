#pragma once

// Synthetic benchmarks with piecewise-constant p(x) along the first
// coordinate, randomly rotated, plus exact and Monte-Carlo Bayes risks.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "strata/core.hpp"

namespace strata {

/// Counter-based 64-bit generator: the n-th output is the SplitMix64 finalizer
/// applied to key + (n + 1) * 0x9E3779B97F4A7C15. Substreams hash (key, index)
/// into a fresh key, so any replication can be regenerated on its own.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed = 0) : key_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + kGolden * ++counter_); }

  CounterRng substream(std::uint64_t index) const {
    return CounterRng(mix(key_ ^ mix(index + kStreamSalt)));
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kStreamSalt = 0x632BE59BD9B4E019ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// One of the six benchmark settings 1.1-1.3 and 2.1-2.3.
struct SettingId {
  int family = 1;
  int variant = 1;

  SettingId() = default;
  SettingId(int f, int v);

  /// Parses "1.1" ... "2.3".
  static SettingId parse(const std::string& text);
  std::string str() const;
  friend bool operator==(const SettingId&, const SettingId&) = default;
};

/// A region [lo, hi) of the first coordinate with constant p(x); the last band
/// of a setting is closed on the right.
struct Band {
  double lo;
  double hi;
  double prob;
};

struct SettingTable {
  double half_width;  ///< x_1 ranges over [-half_width, half_width]
  std::vector<Band> bands;

  double box_length() const { return 2 * half_width; }
  double prob_at(double x1) const;
};

const SettingTable& setting_table(SettingId setting);

/// Boundaries each setting is paired with: 1.1 -> {1/2}; 1.2, 2.1, 2.2 -> {1/3, 2/3};
/// 1.3, 2.3 -> {1/4, 2/4, 3/4}.
Boundaries<double> designated_boundaries(SettingId setting);

/// Haar-distributed orthogonal matrix: Q of the QR factorization of a standard
/// normal matrix, with column signs fixed so diag(R) > 0.
Eigen::MatrixXd random_rotation(Eigen::Index p, CounterRng rng);

/// n points uniform on the setting's box, labels drawn from p(x_1), features
/// rotated by `rotation`. true_probs carries the pre-rotation p(x).
LabeledSample<double> generate_setting(SettingId setting, Eigen::Index n,
                                       const Eigen::MatrixXd& rotation, CounterRng rng);

/// As above with a rotation drawn from rng.substream(0) and points from rng.substream(1).
LabeledSample<double> generate_setting(SettingId setting, Eigen::Index n, Eigen::Index p,
                                       CounterRng rng);

/// Exact risk of the Bayes rule: band-by-band sum of mass times the minimal
/// conditional expected theoretical loss.
double bayes_risk_analytic(SettingId setting, const Boundaries<double>& pi);

/// Monte-Carlo estimate: average theoretical loss of the brute-force Bayes
/// decision over n_mc draws of (x_1, y).
double bayes_risk_monte_carlo(SettingId setting, const Boundaries<double>& pi, std::size_t n_mc,
                              CounterRng rng);

/// Every benchmark p(x) is piecewise constant, so the analytic path always
/// applies and n_mc is ignored.
double bayes_risk(SettingId setting, const Boundaries<double>& pi, std::size_t n_mc, CounterRng rng);

}  // namespace strata
