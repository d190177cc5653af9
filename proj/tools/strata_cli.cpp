// strata: simulate, train, predict, evaluate, experiment, check-surrogate.
//
// Exit codes: 0 success, 1 usage/configuration error, 2 data error,
// 3 numeric or convergence error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "strata/core.hpp"
#include "strata/errors.hpp"
#include "strata/experiment.hpp"
#include "strata/io.hpp"
#include "strata/simulate.hpp"
#include "strata/solver.hpp"
#include "strata/surrogate.hpp"

namespace {

using namespace strata;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct SolverFlags {
  std::size_t max_iterations = SolverConfig{}.max_iterations;
  double rel_tolerance = SolverConfig{}.rel_tolerance;
  std::size_t check_interval = SolverConfig{}.check_interval;
  bool last_iterate = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--max-iterations", max_iterations, "Solver iteration cap")->capture_default_str();
    cmd->add_option("--rel-tol", rel_tolerance, "Relative objective change for stopping")->capture_default_str();
    cmd->add_option("--check-interval", check_interval, "Iterations between stopping checks")->capture_default_str();
    cmd->add_flag("--last-iterate", last_iterate, "Return the last iterate instead of the running average");
  }
  SolverConfig config() const { return {max_iterations, rel_tolerance, check_interval, !last_iterate}; }
};

Boundaries<double> parse_boundaries(const std::string& text) {
  return Boundaries<double>(io::parse_number_list(text));
}

std::vector<IntervalIndex> intervals_for(const Eigen::VectorXd& f, const io::ModelFile& m,
                                         const Boundaries<double>& pi) {
  std::vector<IntervalIndex> out;
  out.reserve(static_cast<std::size_t>(f.size()));
  for (Eigen::Index i = 0; i < f.size(); ++i)
    out.push_back(m.loss == Method::piecewise ? predict_interval(f(i), std::span<const double>(m.delta))
                                              : interval_index(sigmoid(f(i)), pi));
  return out;
}

void require_dims(Eigen::Index data_dim, const io::ModelFile& m) {
  if (data_dim != m.model.dim())
    throw DataError("data has " + std::to_string(data_dim) + " feature columns, model expects " +
                    std::to_string(m.model.dim()));
}

int cmd_simulate(const std::string& setting_text, Eigen::Index n, Eigen::Index p, std::uint64_t seed,
                 std::optional<std::size_t> replication, const std::string& split_text,
                 const std::string& out_path) {
  const SettingId setting = SettingId::parse(setting_text);
  LabeledSample<double> sample;
  if (replication) {
    const Split split = split_text == "train" ? Split::train
                        : split_text == "tune" ? Split::tune
                                               : Split::test;
    sample = replication_split(setting, seed, p, *replication, split, n);
  } else {
    sample = generate_setting(setting, n, p, CounterRng(seed));
  }
  io::write_sample_csv(out_path, sample);
  std::cout << "wrote " << sample.size() << " rows (setting " << setting.str() << ", p=" << p << ") to "
            << out_path << '\n';
  return kOk;
}

struct TrainFlags {
  std::string data, pi, loss = "piecewise", grid, tune, out;
  std::optional<double> lambda;
  std::size_t folds = 0;
  SolverFlags solver;
};

int cmd_train(const TrainFlags& f) {
  const Method method = parse_method(f.loss);
  const Boundaries<double> pi = parse_boundaries(f.pi);
  const SurrogateSpec<double> spec = logistic_surrogate(pi);
  const SolverConfig config = f.solver.config();
  if (f.lambda && !(*f.lambda > 0)) throw ConfigError("--lambda must be positive");
  if (!f.lambda && f.grid.empty()) throw ConfigError("one of --lambda or --grid is required");
  if (f.lambda && !f.grid.empty()) throw ConfigError("--lambda and --grid are mutually exclusive");
  if (!f.grid.empty() && f.tune.empty() && f.folds < 2)
    throw ConfigError("--grid needs --tune or --folds >= 2");

  const auto data = io::read_sample_csv(f.data);
  if (data.size() < 1) throw DataError("'" + f.data + "' has no rows");

  double lambda = 0;
  FitResult<double> fit;
  if (f.lambda) {
    lambda = *f.lambda;
    fit = method == Method::piecewise ? fit_piecewise(data, spec, lambda, config)
                                      : fit_logistic(data, lambda, config);
  } else {
    const auto grid = io::parse_grid(f.grid);
    TuneResult tuned;
    if (!f.tune.empty()) {
      const auto tune = io::read_sample_csv(f.tune);
      if (tune.dim() != data.dim()) throw DataError("--tune and --data have different feature counts");
      if (tune.size() < 1) throw DataError("'" + f.tune + "' has no rows");
      tuned = tune_lambda(data, tune, pi, spec, grid, method, config);
    } else {
      tuned = cross_validate_lambda(data, f.folds, pi, spec, grid, method, config);
    }
    lambda = tuned.lambda;
    fit = std::move(tuned.fit);
    std::cout << "grid: " << grid.size() << " values, chosen lambda: " << io::format_double(lambda)
              << " (tuning score " << io::format_double(tuned.score) << ")\n";
  }
  if (!fit.model.w.allFinite() || !std::isfinite(fit.model.b)) throw NumericError("fit produced non-finite model");

  io::ModelFile m;
  m.model = fit.model;
  m.pi.assign(pi.values().begin(), pi.values().end());
  m.delta.assign(spec.deltas().begin(), spec.deltas().end());
  m.loss = method;
  m.lambda = lambda;
  io::write_model(f.out, m);
  std::cout << "objective: " << io::format_double(fit.objective) << " after " << fit.iterations
            << " iterations" << (fit.converged ? "" : " (iteration cap reached)") << '\n';
  return kOk;
}

int cmd_predict(const std::string& model_path, const std::string& data_path, const std::string& out_path) {
  const io::ModelFile m = io::read_model(model_path);
  const Boundaries<double> pi(m.pi);
  const Eigen::MatrixXd x = io::read_features_csv(data_path);
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write '" + out_path + "'");
  if (x.rows() == 0) {
    io::write_predictions_csv(out, Eigen::VectorXd(), {}, pi);
    return kOk;
  }
  require_dims(x.cols(), m);
  const Eigen::VectorXd f = predict_margins(m.model, x);
  io::write_predictions_csv(out, f, intervals_for(f, m, pi), pi);
  return kOk;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path) {
  const io::ModelFile m = io::read_model(model_path);
  const Boundaries<double> pi(m.pi);
  const auto data = io::read_sample_csv(data_path);
  if (data.size() < 1) throw DataError("'" + data_path + "' has no rows");
  require_dims(data.dim(), m);
  const Eigen::VectorXd f = predict_margins(m.model, data.features);
  const auto intervals = intervals_for(f, m, pi);
  double sum = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i)
    sum += theoretical_loss(data.label(i), intervals[static_cast<std::size_t>(i)], pi);
  std::cout << "rows: " << data.size() << "\nmean theoretical loss: "
            << io::format_double(sum / static_cast<double>(data.size())) << '\n';
  return kOk;
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config '" + config_path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  std::vector<std::string> problems;
  const ExperimentConfig config = io::experiment_config_from_json(j, problems);
  if (!problems.empty()) {
    std::string msg = "invalid config fields:";
    for (const auto& p : problems) msg += " " + p;
    throw ConfigError(msg);
  }

  const ExperimentResult result = run_replications(config);
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  {
    std::ofstream csv(dir / "results.csv");
    if (!csv) throw DataError("cannot write results.csv in '" + out_dir + "'");
    io::write_results_csv(csv, result);
  }
  {
    std::ofstream summary(dir / "summary.json");
    if (!summary) throw DataError("cannot write summary.json in '" + out_dir + "'");
    summary << io::summary_to_json(result).dump(2) << '\n';
  }

  std::printf("%-8s %4s %-10s %10s %10s\n", "setting", "p", "method", "median", "SE");
  for (const auto& s : result.summaries)
    std::printf("%-8s %4ld %-10s %10.6f %10.6f\n", result.setting.str().c_str(), static_cast<long>(s.p),
                to_string(s.method).c_str(), s.median, s.std_error);
  std::printf("bayes floor: %.6f\n", result.bayes_floor);
  for (const auto& f : result.failures)
    std::fprintf(stderr, "replication %zu (p=%ld, seed %llu) failed: %s\n", f.replication,
                 static_cast<long>(f.p), static_cast<unsigned long long>(f.seed), f.message.c_str());
  return kOk;
}

int cmd_check_surrogate(const std::string& pi_text, const std::string& out_path) {
  const Boundaries<double> pi = parse_boundaries(pi_text);
  const SurrogateSpec<double> spec = logistic_surrogate(pi);
  const auto report = check_consistency(spec);
  std::cout << "K = " << spec.size() << '\n';
  for (std::size_t k = 1; k <= spec.size(); ++k) {
    const auto pos = spec.pos_segments()[k - 1];
    const auto neg = spec.neg_segments()[k - 1];
    std::printf("pi_%zu = %.6f  A+ = %.6f  B+ = %.6f  A- = %.6f  B- = %.6f  delta = %.6f  residual = %.3g\n",
                k, pi[k], pos.intercept, pos.slope, neg.intercept, neg.slope, spec.deltas()[k - 1],
                report.threshold_residuals[k - 1]);
  }
  std::cout << "hinges:";
  for (double h : spec.hinges()) std::printf(" %.6f", h);
  std::cout << "\nC1 " << (report.c1_ok ? "ok" : "FAIL") << ", C2 " << (report.c2_ok ? "ok" : "FAIL")
            << ", C3 " << (report.c3_ok ? "ok" : "FAIL") << '\n';
  std::printf("risk constant: %.6f\n", risk_constant(spec));
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write '" + out_path + "'");
    out << io::surrogate_to_json(spec).dump(2) << '\n';
  }
  return report.ok() ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stratified binary classification with piecewise linear surrogate losses"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Draw a dataset from a benchmark setting");
  std::string sim_setting, sim_split = "train", sim_out;
  Eigen::Index sim_n = 0, sim_p = 2;
  std::uint64_t sim_seed = 1;
  std::optional<std::size_t> sim_rep;
  sim->add_option("--setting", sim_setting, "Setting 1.1 .. 2.3")->required();
  sim->add_option("--n", sim_n, "Number of rows")->required()->check(CLI::PositiveNumber);
  sim->add_option("--p", sim_p, "Dimension")->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "Seed (the experiment master seed with --replication)")->capture_default_str();
  sim->add_option("--replication", sim_rep, "Reproduce this replication's split of an experiment");
  sim->add_option("--split", sim_split, "Split with --replication")
      ->check(CLI::IsMember({"train", "tune", "test"}))
      ->capture_default_str();
  sim->add_option("--out", sim_out, "Output CSV")->required();

  auto* train = app.add_subcommand("train", "Fit a linear classifier");
  TrainFlags tf;
  train->add_option("--data", tf.data, "Training CSV (x1..xp, y)")->required();
  train->add_option("--pi", tf.pi, "Comma-separated boundaries, e.g. 0.25,0.5,0.75")->required();
  train->add_option("--loss", tf.loss, "piecewise | logistic")
      ->check(CLI::IsMember({"piecewise", "logistic"}))
      ->capture_default_str();
  train->add_option("--lambda", tf.lambda, "Penalty");
  train->add_option("--grid", tf.grid, "Penalty grid: 2^a..2^b or a comma list");
  train->add_option("--tune", tf.tune, "Tuning CSV for --grid");
  train->add_option("--folds", tf.folds, "k-fold CV on the training data for --grid (instead of --tune)");
  train->add_option("--out", tf.out, "Model JSON")->required();
  tf.solver.attach(train);

  auto* predict = app.add_subcommand("predict", "Margins and intervals for new rows");
  std::string pred_model, pred_data, pred_out;
  predict->add_option("--model", pred_model, "Model JSON")->required();
  predict->add_option("--data", pred_data, "CSV with x1..xp")->required();
  predict->add_option("--out", pred_out, "Predictions CSV")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Mean theoretical loss of a model on labeled data");
  std::string eval_model, eval_data;
  evaluate->add_option("--model", eval_model, "Model JSON")->required();
  evaluate->add_option("--data", eval_data, "CSV with x1..xp, y")->required();

  auto* experiment = app.add_subcommand("experiment", "Run a replicated simulation study");
  std::string exp_config, exp_out;
  experiment->add_option("--config", exp_config, "Experiment config JSON")->required();
  experiment->add_option("--out-dir", exp_out, "Directory for results.csv and summary.json")->required();

  auto* check = app.add_subcommand("check-surrogate", "Build and verify the logistic-derived surrogate");
  std::string check_pi, check_out;
  check->add_option("--pi", check_pi, "Comma-separated boundaries")->required();
  check->add_option("--out", check_out, "Optional surrogate JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) return cmd_simulate(sim_setting, sim_n, sim_p, sim_seed, sim_rep, sim_split, sim_out);
    if (*train) return cmd_train(tf);
    if (*predict) return cmd_predict(pred_model, pred_data, pred_out);
    if (*evaluate) return cmd_evaluate(eval_model, eval_data);
    if (*experiment) return cmd_experiment(exp_config, exp_out);
    if (*check) return cmd_check_surrogate(check_pi, check_out);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
  return kUsage;
}
