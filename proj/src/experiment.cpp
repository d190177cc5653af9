#include "strata/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>
#include <tuple>

#include "strata/errors.hpp"

namespace strata {

std::string to_string(Method method) {
  return method == Method::piecewise ? "piecewise" : "logistic";
}

Method parse_method(const std::string& text) {
  if (text == "piecewise") return Method::piecewise;
  if (text == "logistic") return Method::logistic;
  throw ConfigError("loss must be 'piecewise' or 'logistic', got '" + text + "'");
}

std::vector<double> power_of_two_grid(int lo, int hi) {
  if (lo > hi) throw ConfigError("grid: lower exponent exceeds upper exponent");
  std::vector<double> grid;
  for (int e = lo; e <= hi; ++e) grid.push_back(std::ldexp(1.0, e));
  return grid;
}

double mean_negative_log_likelihood(const LinearModel<double>& model, const LabeledSample<double>& data) {
  const Eigen::VectorXd f = predict_margins(model, data.features);
  double sum = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) sum += logistic_loss(data.labels(i) * f(i));
  return sum / static_cast<double>(data.size());
}

IntervalIndex predicted_interval(double f, const Boundaries<double>& pi,
                                 const SurrogateSpec<double>& spec, Method method) {
  if (method == Method::piecewise) return predict_interval(f, spec);
  return interval_index(sigmoid(f), pi);
}

double evaluate_model(const LinearModel<double>& model, const LabeledSample<double>& test,
                      const Boundaries<double>& pi, const SurrogateSpec<double>& spec, Method method) {
  if (test.size() < 1) throw ConfigError("evaluate_model: empty test set");
  const Eigen::VectorXd f = predict_margins(model, test.features);
  double sum = 0;
  for (Eigen::Index i = 0; i < test.size(); ++i)
    sum += theoretical_loss(test.label(i), predicted_interval(f(i), pi, spec, method), pi);
  return sum / static_cast<double>(test.size());
}

namespace {

FitResult<double> fit(const LabeledSample<double>& train, const SurrogateSpec<double>& spec,
                      double lambda, Method method, const SolverConfig& config) {
  return method == Method::piecewise ? fit_piecewise(train, spec, lambda, config)
                                     : fit_logistic(train, lambda, config);
}

double score(const LinearModel<double>& model, const LabeledSample<double>& tune,
             const Boundaries<double>& pi, const SurrogateSpec<double>& spec, Method method) {
  return method == Method::piecewise ? evaluate_model(model, tune, pi, spec, method)
                                     : mean_negative_log_likelihood(model, tune);
}

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("tune_lambda: empty lambda grid");
  for (double l : grid)
    if (!(l > 0) || !std::isfinite(l)) throw ConfigError("tune_lambda: grid values must be positive");
}

LabeledSample<double> subset(const LabeledSample<double>& data, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), data.dim());
  Eigen::VectorXi y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) = data.features.row(rows[r]);
    y(static_cast<Eigen::Index>(r)) = data.labels(rows[r]);
  }
  return LabeledSample<double>(std::move(x), std::move(y));
}

}  // namespace

TuneResult tune_lambda(const LabeledSample<double>& train, const LabeledSample<double>& tune,
                       const Boundaries<double>& pi, const SurrogateSpec<double>& spec,
                       const std::vector<double>& grid, Method method, const SolverConfig& config) {
  check_grid(grid);
  if (train.dim() != tune.dim()) throw ConfigError("tune_lambda: train/tune dimensions differ");
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());

  std::optional<TuneResult> best;
  for (double lambda : sorted) {
    FitResult<double> result = fit(train, spec, lambda, method, config);
    const double s = score(result.model, tune, pi, spec, method);
    if (!best || s < best->score) best = TuneResult{lambda, s, std::move(result)};
  }
  return *best;
}

TuneResult cross_validate_lambda(const LabeledSample<double>& train, std::size_t folds,
                                 const Boundaries<double>& pi, const SurrogateSpec<double>& spec,
                                 const std::vector<double>& grid, Method method,
                                 const SolverConfig& config) {
  check_grid(grid);
  if (folds < 2 || static_cast<Eigen::Index>(folds) > train.size())
    throw ConfigError("cross_validate_lambda: folds must be in [2, n]");
  std::vector<LabeledSample<double>> fit_parts, held_parts;
  for (std::size_t fold = 0; fold < folds; ++fold) {
    std::vector<Eigen::Index> in, out;
    for (Eigen::Index i = 0; i < train.size(); ++i)
      (static_cast<std::size_t>(i) % folds == fold ? out : in).push_back(i);
    fit_parts.push_back(subset(train, in));
    held_parts.push_back(subset(train, out));
  }
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());

  double best_lambda = sorted.front();
  double best_score = std::numeric_limits<double>::infinity();
  for (double lambda : sorted) {
    double total = 0;
    for (std::size_t fold = 0; fold < folds; ++fold) {
      const auto result = fit(fit_parts[fold], spec, lambda, method, config);
      total += score(result.model, held_parts[fold], pi, spec, method) *
               static_cast<double>(held_parts[fold].size());
    }
    const double s = total / static_cast<double>(train.size());
    if (s < best_score) {
      best_score = s;
      best_lambda = lambda;
    }
  }
  return TuneResult{best_lambda, best_score, fit(train, spec, best_lambda, method, config)};
}

std::vector<std::string> ExperimentConfig::problems() const {
  std::vector<std::string> bad;
  if (dims.empty()) bad.push_back("dims");
  for (auto p : dims)
    if (p < 1) {
      bad.push_back("dims");
      break;
    }
  if (n_train < 1) bad.push_back("n_train");
  if (n_tune < 1 && cv_folds == 0) bad.push_back("n_tune");
  if (n_test < 1) bad.push_back("n_test");
  if (replications < 1) bad.push_back("replications");
  if (lambda_grid.empty()) bad.push_back("lambda_grid");
  for (double l : lambda_grid)
    if (!(l > 0) || !std::isfinite(l)) {
      bad.push_back("lambda_grid");
      break;
    }
  if (cv_folds == 1 || (cv_folds > 1 && static_cast<Eigen::Index>(cv_folds) > n_train))
    bad.push_back("cv_folds");
  try {
    solver.validate();
  } catch (const ConfigError&) {
    bad.push_back("solver");
  }
  return bad;
}

const MethodSummary& ExperimentResult::summary(Eigen::Index p, Method method) const {
  for (const auto& s : summaries)
    if (s.p == p && s.method == method) return s;
  throw ConfigError("no summary for p=" + std::to_string(p) + " method=" + to_string(method));
}

CounterRng replication_stream(std::uint64_t master_seed, Eigen::Index p, std::size_t replication) {
  return CounterRng(master_seed)
      .substream(static_cast<std::uint64_t>(p))
      .substream(static_cast<std::uint64_t>(replication));
}

LabeledSample<double> replication_split(SettingId setting, std::uint64_t master_seed, Eigen::Index p,
                                        std::size_t replication, Split split, Eigen::Index n) {
  const CounterRng rep = replication_stream(master_seed, p, replication);
  return generate_setting(setting, n, random_rotation(p, rep.substream(0)),
                          rep.substream(static_cast<std::uint64_t>(split)));
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  // linear interpolation between order statistics
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::vector<MethodSummary> summarize(const std::vector<ReplicationRecord>& records) {
  std::vector<std::pair<Eigen::Index, Method>> keys;
  for (const auto& r : records)
    if (std::find(keys.begin(), keys.end(), std::pair{r.p, r.method}) == keys.end())
      keys.emplace_back(r.p, r.method);
  std::sort(keys.begin(), keys.end());

  std::vector<MethodSummary> out;
  for (const auto& [p, method] : keys) {
    std::vector<double> losses;
    for (const auto& r : records)
      if (r.p == p && r.method == method) losses.push_back(r.test_loss);
    std::sort(losses.begin(), losses.end());
    const double n = static_cast<double>(losses.size());
    double mean = 0;
    for (double l : losses) mean += l;
    mean /= n;
    double ss = 0;
    for (double l : losses) ss += (l - mean) * (l - mean);
    MethodSummary s;
    s.p = p;
    s.method = method;
    s.count = losses.size();
    s.median = quantile(losses, 0.5);
    s.std_error = losses.size() > 1 ? std::sqrt(ss / (n - 1)) / std::sqrt(n) : 0.0;
    s.q1 = quantile(losses, 0.25);
    s.q3 = quantile(losses, 0.75);
    s.iqr = s.q3 - s.q1;
    s.min = losses.front();
    s.max = losses.back();
    out.push_back(s);
  }
  return out;
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("MS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentResult run_replications(const ExperimentConfig& config) {
  if (const auto bad = config.problems(); !bad.empty()) {
    std::string msg = "invalid experiment config:";
    for (const auto& b : bad) msg += " " + b;
    throw ConfigError(msg);
  }
  const Boundaries<double> pi = config.effective_boundaries();
  const SurrogateSpec<double> spec = logistic_surrogate(pi);

  struct Task {
    Eigen::Index p;
    std::size_t replication;
  };
  std::vector<Task> tasks;
  for (auto p : config.dims)
    for (std::size_t r = 0; r < config.replications; ++r) tasks.push_back({p, r});

  // one slot per task keeps aggregation independent of scheduling order
  std::vector<std::vector<ReplicationRecord>> slots(tasks.size());
  std::vector<std::optional<ReplicationFailure>> failed(tasks.size());

  auto run_task = [&](std::size_t t) {
    const Task& task = tasks[t];
    try {
      const auto train = replication_split(config.setting, config.master_seed, task.p,
                                           task.replication, Split::train, config.n_train);
      const auto test = replication_split(config.setting, config.master_seed, task.p,
                                          task.replication, Split::test, config.n_test);
      std::optional<LabeledSample<double>> tune;
      if (config.cv_folds == 0)
        tune = replication_split(config.setting, config.master_seed, task.p, task.replication,
                                 Split::tune, config.n_tune);
      for (Method method : {Method::piecewise, Method::logistic}) {
        const TuneResult tuned =
            config.cv_folds == 0
                ? tune_lambda(train, *tune, pi, spec, config.lambda_grid, method, config.solver)
                : cross_validate_lambda(train, config.cv_folds, pi, spec, config.lambda_grid, method,
                                        config.solver);
        slots[t].push_back({config.setting, task.p, task.replication, method, tuned.lambda,
                            evaluate_model(tuned.fit.model, test, pi, spec, method),
                            tuned.fit.converged});
      }
    } catch (const std::exception& e) {
      slots[t].clear();
      failed[t] = ReplicationFailure{task.p, task.replication,
                                     replication_stream(config.master_seed, task.p, task.replication).key(),
                                     e.what()};
    }
  };

  const std::size_t threads =
      std::min(tasks.size(), config.threads > 0 ? config.threads : default_thread_count());
  if (threads <= 1) {
    for (std::size_t t = 0; t < tasks.size(); ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) run_task(t);
      });
  }

  ExperimentResult result;
  result.setting = config.setting;
  result.boundaries.assign(pi.values().begin(), pi.values().end());
  result.bayes_floor = bayes_risk_analytic(config.setting, pi);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (auto& rec : slots[t]) result.records.push_back(rec);
    if (failed[t]) result.failures.push_back(*failed[t]);
  }
  std::stable_sort(result.records.begin(), result.records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.p, a.replication, a.method) < std::tie(b.p, b.replication, b.method);
  });
  result.summaries = summarize(result.records);
  return result;
}

}  // namespace strata
