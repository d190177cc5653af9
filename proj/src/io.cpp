#include "strata/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

#include "strata/errors.hpp"

namespace strata::io {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, std::size_t row, const std::string& column) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size() || errno == ERANGE || !std::isfinite(v))
    throw DataError("row " + std::to_string(row) + ", column '" + column + "': cannot parse '" +
                    text + "' as a finite number");
  return v;
}

struct Layout {
  std::vector<std::string> names;
  std::vector<std::size_t> feature_cols;
  std::optional<std::size_t> y_col;
  std::optional<std::size_t> prob_col;
};

Layout parse_header(const std::string& line) {
  Layout layout;
  layout.names = split_fields(line);
  std::vector<std::pair<int, std::size_t>> features;
  for (std::size_t c = 0; c < layout.names.size(); ++c) {
    const std::string& name = layout.names[c];
    if (name == "y") {
      layout.y_col = c;
    } else if (name == "true_prob") {
      layout.prob_col = c;
    } else if (name.size() > 1 && name[0] == 'x' &&
               name.find_first_not_of("0123456789", 1) == std::string::npos) {
      features.emplace_back(std::stoi(name.substr(1)), c);
    } else {
      throw DataError("header: unexpected column '" + name + "' (expected x1..xp, y, true_prob)");
    }
  }
  std::sort(features.begin(), features.end());
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (features[j].first != static_cast<int>(j + 1))
      throw DataError("header: missing feature column 'x" + std::to_string(j + 1) + "'");
    layout.feature_cols.push_back(features[j].second);
  }
  return layout;
}

struct Table {
  Layout layout;
  Eigen::MatrixXd x;
  std::vector<int> y;
  std::vector<double> prob;
};

Table read_table(std::istream& in, bool require_labels) {
  Table t;
  std::string line;
  if (!std::getline(in, line) || line.find_first_not_of(" \t\r") == std::string::npos) {
    if (require_labels) throw DataError("missing header row (expected x1..xp, y)");
    return t;
  }
  t.layout = parse_header(line);
  if (require_labels && !t.layout.y_col) throw DataError("missing required column 'y'");
  if (t.layout.feature_cols.empty()) throw DataError("header: no feature columns x1..xp");

  std::vector<std::vector<double>> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    if (fields.size() != t.layout.names.size())
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(t.layout.names.size()) + " fields, got " +
                      std::to_string(fields.size()));
    std::vector<double> xs;
    for (std::size_t c : t.layout.feature_cols) xs.push_back(parse_number(fields[c], row, t.layout.names[c]));
    rows.push_back(std::move(xs));
    if (t.layout.y_col) {
      const double v = parse_number(fields[*t.layout.y_col], row, "y");
      if (v != 1.0 && v != -1.0)
        throw DataError("row " + std::to_string(row) + ", column 'y': label must be -1 or +1, got '" +
                        fields[*t.layout.y_col] + "'");
      t.y.push_back(static_cast<int>(v));
    }
    if (t.layout.prob_col) {
      const double p = parse_number(fields[*t.layout.prob_col], row, "true_prob");
      if (p < 0 || p > 1)
        throw DataError("row " + std::to_string(row) + ", column 'true_prob': outside [0,1]");
      t.prob.push_back(p);
    }
  }
  t.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.layout.feature_cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      t.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return t;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

}  // namespace

LabeledSample<double> read_sample_csv(std::istream& in) {
  Table t = read_table(in, true);
  Eigen::VectorXi y(static_cast<Eigen::Index>(t.y.size()));
  for (std::size_t i = 0; i < t.y.size(); ++i) y(static_cast<Eigen::Index>(i)) = t.y[i];
  std::optional<Eigen::VectorXd> probs;
  if (t.layout.prob_col) probs = Eigen::Map<Eigen::VectorXd>(t.prob.data(), static_cast<Eigen::Index>(t.prob.size()));
  return LabeledSample<double>(std::move(t.x), std::move(y), std::move(probs));
}

LabeledSample<double> read_sample_csv(const std::string& path) {
  auto in = open_in(path);
  return read_sample_csv(in);
}

Eigen::MatrixXd read_features_csv(std::istream& in) { return read_table(in, false).x; }

Eigen::MatrixXd read_features_csv(const std::string& path) {
  auto in = open_in(path);
  return read_features_csv(in);
}

void write_sample_csv(std::ostream& out, const LabeledSample<double>& sample) {
  for (Eigen::Index j = 0; j < sample.dim(); ++j) out << 'x' << (j + 1) << ',';
  out << 'y' << (sample.true_probs ? ",true_prob" : "") << '\n';
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    for (Eigen::Index j = 0; j < sample.dim(); ++j) out << format_double(sample.features(i, j)) << ',';
    out << sample.labels(i);
    if (sample.true_probs) out << ',' << format_double((*sample.true_probs)(i));
    out << '\n';
  }
}

void write_sample_csv(const std::string& path, const LabeledSample<double>& sample) {
  auto out = open_out(path);
  write_sample_csv(out, sample);
}

json surrogate_to_json(const SurrogateSpec<double>& spec) {
  json j;
  j["pi"] = std::vector<double>(spec.boundaries().values().begin(), spec.boundaries().values().end());
  std::vector<double> ap, bp, an, bn;
  for (const auto& s : spec.pos_segments()) {
    ap.push_back(s.intercept);
    bp.push_back(s.slope);
  }
  for (const auto& s : spec.neg_segments()) {
    an.push_back(s.intercept);
    bn.push_back(s.slope);
  }
  j["A_pos"] = ap;
  j["B_pos"] = bp;
  j["A_neg"] = an;
  j["B_neg"] = bn;
  j["delta"] = std::vector<double>(spec.deltas().begin(), spec.deltas().end());
  j["hinges"] = std::vector<double>(spec.hinges().begin(), spec.hinges().end());
  return j;
}

SurrogateSpec<double> surrogate_from_json(const json& j) {
  try {
    const auto ap = j.at("A_pos").get<std::vector<double>>();
    const auto bp = j.at("B_pos").get<std::vector<double>>();
    const auto an = j.at("A_neg").get<std::vector<double>>();
    const auto bn = j.at("B_neg").get<std::vector<double>>();
    if (ap.size() != bp.size() || an.size() != bn.size() || ap.size() != an.size())
      throw DataError("surrogate JSON: segment arrays differ in length");
    std::vector<Segment<double>> pos, neg;
    for (std::size_t k = 0; k < ap.size(); ++k) {
      pos.push_back({ap[k], bp[k]});
      neg.push_back({an[k], bn[k]});
    }
    SurrogateSpec<double> spec(Boundaries<double>(j.at("pi").get<std::vector<double>>()), std::move(pos),
                               std::move(neg), j.at("delta").get<std::vector<double>>(),
                               j.at("hinges").get<std::vector<double>>());
    if (!check_consistency(spec).ok()) throw DataError("surrogate JSON: spec is not consistent");
    return spec;
  } catch (const json::exception& e) {
    throw DataError(std::string("surrogate JSON: ") + e.what());
  }
}

json model_to_json(const ModelFile& m) {
  json j;
  j["w"] = std::vector<double>(m.model.w.data(), m.model.w.data() + m.model.w.size());
  j["b"] = m.model.b;
  j["pi"] = m.pi;
  j["delta"] = m.delta;
  j["loss"] = to_string(m.loss);
  j["lambda"] = m.lambda;
  return j;
}

ModelFile model_from_json(const json& j) {
  try {
    ModelFile m;
    const auto w = j.at("w").get<std::vector<double>>();
    m.model = LinearModel<double>(Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())),
                                  j.at("b").get<double>());
    m.pi = j.at("pi").get<std::vector<double>>();
    m.delta = j.at("delta").get<std::vector<double>>();
    m.loss = parse_method(j.at("loss").get<std::string>());
    m.lambda = j.at("lambda").get<double>();
    Boundaries<double> check(m.pi);
    detail::require_increasing_thresholds<double>(m.delta, check.size());
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  }
}

namespace {

// nlohmann/json prints doubles with the shortest round-trip representation,
// so dumps are exact.
void write_json(const std::string& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("'" + path + "': " + e.what());
  }
}

}  // namespace

void write_model(const std::string& path, const ModelFile& m) { write_json(path, model_to_json(m)); }

ModelFile read_model(const std::string& path) { return model_from_json(read_json(path)); }

void write_predictions_csv(std::ostream& out, const Eigen::VectorXd& margins,
                           const std::vector<IntervalIndex>& intervals, const Boundaries<double>& pi) {
  out << "f,interval_index,interval_lo,interval_hi\n";
  for (Eigen::Index i = 0; i < margins.size(); ++i) {
    const auto k = intervals[static_cast<std::size_t>(i)];
    const auto [lo, hi] = pi.interval(k);
    out << format_double(margins(i)) << ',' << k.value << ',' << format_double(lo) << ','
        << format_double(hi) << '\n';
  }
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& field : split_fields(text)) {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(field.c_str(), &end);
    if (field.empty() || end != field.c_str() + field.size() || errno == ERANGE || !std::isfinite(v))
      throw ConfigError("list '" + text + "': item " + std::to_string(out.size() + 1) +
                        " is not a finite number");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) return parse_number_list(text);
  auto exponent = [&](const std::string& part) {
    if (part.rfind("2^", 0) != 0) throw ConfigError("grid: expected 2^a..2^b, got '" + text + "'");
    const std::string e = part.substr(2);
    char* end = nullptr;
    const long v = std::strtol(e.c_str(), &end, 10);
    if (e.empty() || *end != '\0') throw ConfigError("grid: bad exponent in '" + text + "'");
    return static_cast<int>(v);
  };
  return power_of_two_grid(exponent(text.substr(0, dots)), exponent(text.substr(dots + 2)));
}

ExperimentConfig experiment_config_from_json(const json& j, std::vector<std::string>& problems) {
  ExperimentConfig c;
  static const std::vector<std::string> known = {
      "setting", "dims", "n_train", "n_tune", "n_test", "replications", "lambda_grid",
      "boundaries", "master_seed", "solver", "cv_folds", "threads"};
  if (!j.is_object()) {
    problems.push_back("<root>");
    return c;
  }
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) problems.push_back(key);

  auto field = [&](const char* name, auto&& apply) {
    if (!j.contains(name)) return;
    try {
      apply(j.at(name));
    } catch (const std::exception&) {
      problems.push_back(name);
    }
  };
  if (!j.contains("setting")) problems.push_back("setting");
  field("setting", [&](const json& v) { c.setting = SettingId::parse(v.get<std::string>()); });
  field("dims", [&](const json& v) { c.dims = v.get<std::vector<Eigen::Index>>(); });
  field("n_train", [&](const json& v) { c.n_train = v.get<Eigen::Index>(); });
  field("n_tune", [&](const json& v) { c.n_tune = v.get<Eigen::Index>(); });
  field("n_test", [&](const json& v) { c.n_test = v.get<Eigen::Index>(); });
  field("replications", [&](const json& v) { c.replications = v.get<std::size_t>(); });
  field("lambda_grid", [&](const json& v) {
    c.lambda_grid = v.is_string() ? parse_grid(v.get<std::string>()) : v.get<std::vector<double>>();
  });
  field("boundaries", [&](const json& v) { c.boundaries = Boundaries<double>(v.get<std::vector<double>>()); });
  field("master_seed", [&](const json& v) { c.master_seed = v.get<std::uint64_t>(); });
  field("cv_folds", [&](const json& v) { c.cv_folds = v.get<std::size_t>(); });
  field("threads", [&](const json& v) { c.threads = v.get<std::size_t>(); });
  field("solver", [&](const json& v) {
    for (const auto& [key, _] : v.items())
      if (key != "max_iterations" && key != "rel_tolerance" && key != "check_interval" && key != "averaging")
        throw ConfigError(key);
    c.solver.max_iterations = v.value("max_iterations", c.solver.max_iterations);
    c.solver.rel_tolerance = v.value("rel_tolerance", c.solver.rel_tolerance);
    c.solver.check_interval = v.value("check_interval", c.solver.check_interval);
    c.solver.averaging = v.value("averaging", c.solver.averaging);
  });
  for (const auto& p : c.problems())
    if (std::find(problems.begin(), problems.end(), p) == problems.end()) problems.push_back(p);
  return c;
}

void write_results_csv(std::ostream& out, const ExperimentResult& result) {
  out << "setting,p,replication,method,lambda,test_loss\n";
  for (const auto& r : result.records)
    out << r.setting.str() << ',' << r.p << ',' << r.replication << ',' << to_string(r.method) << ','
        << format_double(r.lambda) << ',' << format_double(r.test_loss) << '\n';
}

json summary_to_json(const ExperimentResult& result) {
  json j;
  j["setting"] = result.setting.str();
  j["boundaries"] = result.boundaries;
  j["bayes_floor"] = result.bayes_floor;
  j["summaries"] = json::array();
  for (const auto& s : result.summaries) {
    j["summaries"].push_back({{"p", s.p},
                              {"method", to_string(s.method)},
                              {"count", s.count},
                              {"median", s.median},
                              {"std_error", s.std_error},
                              {"q1", s.q1},
                              {"q3", s.q3},
                              {"iqr", s.iqr},
                              {"min", s.min},
                              {"max", s.max}});
  }
  j["failures"] = json::array();
  for (const auto& f : result.failures)
    j["failures"].push_back(
        {{"p", f.p}, {"replication", f.replication}, {"seed", f.seed}, {"message", f.message}});
  return j;
}

}  // namespace strata::io
