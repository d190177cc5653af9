#pragma once

// File formats: sample CSV (x1..xp, y[, true_prob]), model JSON, surrogate
// JSON, predictions CSV, experiment config JSON, results CSV and summary JSON.
// Numbers are written with 17 significant digits so they round-trip exactly.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "strata/core.hpp"
#include "strata/experiment.hpp"
#include "strata/solver.hpp"
#include "strata/surrogate.hpp"

namespace strata::io {

std::string format_double(double v);

/// Reads a sample with a mandatory header: feature columns x1..xp, a `y`
/// column, and optionally `true_prob`. Malformed input raises DataError
/// naming the row and column.
LabeledSample<double> read_sample_csv(std::istream& in);
LabeledSample<double> read_sample_csv(const std::string& path);

/// Feature columns only; `y` and `true_prob` are ignored when present. An
/// empty file yields a 0 x 0 matrix.
Eigen::MatrixXd read_features_csv(std::istream& in);
Eigen::MatrixXd read_features_csv(const std::string& path);

void write_sample_csv(std::ostream& out, const LabeledSample<double>& sample);
void write_sample_csv(const std::string& path, const LabeledSample<double>& sample);

nlohmann::json surrogate_to_json(const SurrogateSpec<double>& spec);
/// Rebuilds a spec from JSON; the result is checked for consistency.
SurrogateSpec<double> surrogate_from_json(const nlohmann::json& j);

struct ModelFile {
  LinearModel<double> model;
  std::vector<double> pi;
  std::vector<double> delta;
  Method loss = Method::piecewise;
  double lambda = 0;
};

nlohmann::json model_to_json(const ModelFile& m);
ModelFile model_from_json(const nlohmann::json& j);
void write_model(const std::string& path, const ModelFile& m);
ModelFile read_model(const std::string& path);

/// One row per margin: f, interval_index, interval_lo, interval_hi.
void write_predictions_csv(std::ostream& out, const Eigen::VectorXd& margins,
                           const std::vector<IntervalIndex>& intervals, const Boundaries<double>& pi);

/// Parses an experiment config. Unknown or malformed fields are collected into
/// `problems`; the returned config is meaningful only when it stays empty.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, std::vector<std::string>& problems);

/// Expands "2^a..2^b" into integer powers of two, or a comma list of numbers.
std::vector<double> parse_grid(const std::string& text);
std::vector<double> parse_number_list(const std::string& text);

void write_results_csv(std::ostream& out, const ExperimentResult& result);
nlohmann::json summary_to_json(const ExperimentResult& result);

}  // namespace strata::io
