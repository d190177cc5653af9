#include "strata/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "strata/errors.hpp"

namespace strata {

SettingId::SettingId(int f, int v) : family(f), variant(v) {
  if (f < 1 || f > 2 || v < 1 || v > 3)
    throw ConfigError("unknown setting " + std::to_string(f) + "." + std::to_string(v));
}

SettingId SettingId::parse(const std::string& text) {
  const auto dot = text.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 >= text.size())
    throw ConfigError("setting must look like 1.1 .. 2.3, got '" + text + "'");
  try {
    std::size_t used_f = 0, used_v = 0;
    const int f = std::stoi(text.substr(0, dot), &used_f);
    const int v = std::stoi(text.substr(dot + 1), &used_v);
    if (used_f != dot || used_v != text.size() - dot - 1) throw std::invalid_argument(text);
    return SettingId(f, v);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("setting must look like 1.1 .. 2.3, got '" + text + "'");
  }
}

std::string SettingId::str() const { return std::to_string(family) + "." + std::to_string(variant); }

double SettingTable::prob_at(double x1) const {
  for (std::size_t i = 0; i + 1 < bands.size(); ++i)
    if (x1 < bands[i].hi) return bands[i].prob;
  return bands.back().prob;
}

const SettingTable& setting_table(SettingId setting) {
  static const SettingTable tables[2][3] = {
      {
          {8, {{-8, 0, 1.0 / 4}, {0, 8, 3.0 / 4}}},
          {8, {{-8, -8.0 / 3, 1.0 / 6}, {-8.0 / 3, 8.0 / 3, 3.0 / 6}, {8.0 / 3, 8, 5.0 / 6}}},
          {8, {{-8, -4, 1.0 / 8}, {-4, 0, 3.0 / 8}, {0, 4, 5.0 / 8}, {4, 8, 7.0 / 8}}},
      },
      {
          {4, {{-4, -0.6, 1.0 / 6}, {-0.6, 0.6, 3.0 / 6}, {0.6, 4, 5.0 / 6}}},
          {4, {{-4, -2, 1.0 / 6}, {-2, 0, 3.0 / 6}, {0, 4, 5.0 / 6}}},
          {4, {{-4, -0.8, 1.0 / 8}, {-0.8, 0, 3.0 / 8}, {0, 0.8, 5.0 / 8}, {0.8, 4, 7.0 / 8}}},
      },
  };
  const SettingId checked(setting.family, setting.variant);
  return tables[checked.family - 1][checked.variant - 1];
}

Boundaries<double> designated_boundaries(SettingId setting) {
  const std::size_t bands = setting_table(setting).bands.size();
  if (bands == 2) return Boundaries<double>{0.5};
  if (bands == 3) return Boundaries<double>{1.0 / 3, 2.0 / 3};
  return Boundaries<double>{0.25, 0.5, 0.75};
}

Eigen::MatrixXd random_rotation(Eigen::Index p, CounterRng rng) {
  if (p < 1) throw DomainError("random_rotation: dimension must be >= 1");
  // the sign fix below would turn a negative 1x1 draw into a reflection
  if (p == 1) return Eigen::MatrixXd::Identity(1, 1);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < p; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < p; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

LabeledSample<double> generate_setting(SettingId setting, Eigen::Index n,
                                       const Eigen::MatrixXd& rotation, CounterRng rng) {
  if (n < 1) throw ConfigError("generate_setting: n must be >= 1");
  const Eigen::Index p = rotation.rows();
  if (p < 1 || rotation.cols() != p) throw ConfigError("generate_setting: rotation must be square");
  const SettingTable& table = setting_table(setting);

  std::uniform_real_distribution<double> first(-table.half_width, table.half_width);
  std::uniform_real_distribution<double> rest(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Eigen::MatrixXd raw(n, p);
  Eigen::VectorXi labels(n);
  Eigen::VectorXd probs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    raw(i, 0) = first(rng);
    for (Eigen::Index j = 1; j < p; ++j) raw(i, j) = rest(rng);
    probs(i) = table.prob_at(raw(i, 0));
    labels(i) = unit(rng) < probs(i) ? 1 : -1;
  }
  // rows are points, so x -> Q x becomes X -> X Q^T
  Eigen::MatrixXd rotated = raw * rotation.transpose();
  return LabeledSample<double>(std::move(rotated), std::move(labels), std::move(probs));
}

LabeledSample<double> generate_setting(SettingId setting, Eigen::Index n, Eigen::Index p,
                                       CounterRng rng) {
  return generate_setting(setting, n, random_rotation(p, rng.substream(0)), rng.substream(1));
}

double bayes_risk_analytic(SettingId setting, const Boundaries<double>& pi) {
  const SettingTable& table = setting_table(setting);
  double risk = 0;
  for (const Band& band : table.bands) {
    const double mass = (band.hi - band.lo) / table.box_length();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= pi.size(); ++k) {
      const IntervalIndex cand{k};
      best = std::min(best, band.prob * theoretical_loss(Label::positive, cand, pi) +
                                (1 - band.prob) * theoretical_loss(Label::negative, cand, pi));
    }
    risk += mass * best;
  }
  return risk;
}

double bayes_risk_monte_carlo(SettingId setting, const Boundaries<double>& pi, std::size_t n_mc,
                              CounterRng rng) {
  if (n_mc < 1) throw ConfigError("bayes_risk: n_mc must be >= 1");
  const SettingTable& table = setting_table(setting);
  std::uniform_real_distribution<double> first(-table.half_width, table.half_width);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double sum = 0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    const double p = table.prob_at(first(rng));
    const Label y = unit(rng) < p ? Label::positive : Label::negative;
    sum += theoretical_loss(y, brute_force_bayes(p, pi), pi);
  }
  return sum / static_cast<double>(n_mc);
}

double bayes_risk(SettingId setting, const Boundaries<double>& pi, std::size_t, CounterRng) {
  return bayes_risk_analytic(setting, pi);
}

}  // namespace strata
