#pragma once

// Penalty tuning, evaluation under the theoretical loss, and the replicated
// simulation study comparing piecewise linear and logistic classifiers.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "strata/core.hpp"
#include "strata/simulate.hpp"
#include "strata/solver.hpp"
#include "strata/surrogate.hpp"

namespace strata {

enum class Method { piecewise, logistic };

std::string to_string(Method method);
Method parse_method(const std::string& text);

/// Integer powers of two 2^lo, ..., 2^hi.
std::vector<double> power_of_two_grid(int lo, int hi);

struct TuneResult {
  double lambda = 0;
  double score = 0;  ///< mean theoretical loss (piecewise) or mean negative log-likelihood (logistic)
  FitResult<double> fit;
};

/// Mean negative log-likelihood of a logistic model, i.e. mean log(1 + e^{-y f}).
double mean_negative_log_likelihood(const LinearModel<double>& model, const LabeledSample<double>& data);

/// Fits one model per grid value on `train` and keeps the one with the best
/// tuning score; ties go to the smallest lambda.
TuneResult tune_lambda(const LabeledSample<double>& train, const LabeledSample<double>& tune,
                       const Boundaries<double>& pi, const SurrogateSpec<double>& spec,
                       const std::vector<double>& grid, Method method, const SolverConfig& config);

/// k-fold alternative to a held-out tuning set: fold of observation i is i mod folds.
/// The returned model is refit on all of `train` at the chosen lambda.
TuneResult cross_validate_lambda(const LabeledSample<double>& train, std::size_t folds,
                                 const Boundaries<double>& pi, const SurrogateSpec<double>& spec,
                                 const std::vector<double>& grid, Method method,
                                 const SolverConfig& config);

/// Predicted interval for one margin value: the threshold rule for piecewise
/// models, the interval containing sigmoid(f) for the logistic baseline.
IntervalIndex predicted_interval(double f, const Boundaries<double>& pi,
                                 const SurrogateSpec<double>& spec, Method method);

/// Mean theoretical loss of the model's predicted intervals over `test`.
double evaluate_model(const LinearModel<double>& model, const LabeledSample<double>& test,
                      const Boundaries<double>& pi, const SurrogateSpec<double>& spec, Method method);

struct ExperimentConfig {
  SettingId setting;
  std::vector<Eigen::Index> dims{2, 10, 50};
  Eigen::Index n_train = 100;
  Eigen::Index n_tune = 100;
  Eigen::Index n_test = 10000;
  std::size_t replications = 100;
  std::vector<double> lambda_grid = power_of_two_grid(-15, 10);
  std::optional<Boundaries<double>> boundaries;  ///< defaults to the setting's designated set
  std::uint64_t master_seed = 1;
  /// Test loss is flat in the iteration cap well below the solver's own
  /// default, so the study runs each of its many fits for 2000 iterations.
  SolverConfig solver{.max_iterations = 2000};
  std::size_t cv_folds = 0;  ///< 0: held-out tuning set; >= 2: k-fold CV on the training set
  std::size_t threads = 0;   ///< 0: MS_THREADS or hardware concurrency

  Boundaries<double> effective_boundaries() const {
    return boundaries ? *boundaries : designated_boundaries(setting);
  }
  /// Names of offending fields; empty when valid.
  std::vector<std::string> problems() const;
};

struct ReplicationRecord {
  SettingId setting;
  Eigen::Index p = 0;
  std::size_t replication = 0;
  Method method = Method::piecewise;
  double lambda = 0;
  double test_loss = 0;
  bool converged = false;
};

struct MethodSummary {
  Eigen::Index p = 0;
  Method method = Method::piecewise;
  std::size_t count = 0;
  double median = 0;
  double std_error = 0;  ///< standard error of the mean
  double q1 = 0;
  double q3 = 0;
  double iqr = 0;
  double min = 0;
  double max = 0;
};

struct ReplicationFailure {
  Eigen::Index p = 0;
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct ExperimentResult {
  SettingId setting;
  std::vector<double> boundaries;
  double bayes_floor = 0;
  std::vector<ReplicationRecord> records;  ///< ordered by (p, replication, method)
  std::vector<MethodSummary> summaries;    ///< ordered by (p, method)
  std::vector<ReplicationFailure> failures;

  const MethodSummary& summary(Eigen::Index p, Method method) const;
};

/// Random stream of replication r at dimension p. Its substreams 0..3 drive
/// the rotation and the train, tune and test draws.
CounterRng replication_stream(std::uint64_t master_seed, Eigen::Index p, std::size_t replication);

enum class Split { train = 1, tune = 2, test = 3 };

/// The dataset a replication uses for one split, regenerated on its own.
LabeledSample<double> replication_split(SettingId setting, std::uint64_t master_seed, Eigen::Index p,
                                        std::size_t replication, Split split, Eigen::Index n);

std::vector<MethodSummary> summarize(const std::vector<ReplicationRecord>& records);

/// Thread count from MS_THREADS, falling back to hardware concurrency.
std::size_t default_thread_count();

ExperimentResult run_replications(const ExperimentConfig& config);

}  // namespace strata
