#include "mwgrad/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mwgrad/rng.hpp"

#ifndef MWGRAD_VERSION_STRING
#define MWGRAD_VERSION_STRING "0.0.0-unknown"
#endif

namespace mwgrad {

namespace fs = std::filesystem;

std::string_view version_string() { return MWGRAD_VERSION_STRING; }

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double mean_distance_to_origin(const ParticleSet& particles) {
  return particles.data().rowwise().norm().mean();
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kFourTargetPreset = "paper-4-targets";

void reject_unknown_keys(const Json& obj, const std::set<std::string>& allowed,
                         std::string_view where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
T read_or(const Json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("key '") + key + "' has the wrong type");
  }
}

std::uint64_t read_seed(const Json& obj, std::uint64_t fallback) {
  if (!obj.contains("seed")) return fallback;
  const Json& s = obj.at("seed");
  if (s.is_number_unsigned()) return s.get<std::uint64_t>();
  if (s.is_number_integer() && s.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(s.get<std::int64_t>());
  }
  throw ConfigError("seed must be a non-negative integer");
}

Vector to_vector(const Json& arr, std::string_view what) {
  if (!arr.is_array() || arr.empty()) throw ConfigError(std::string(what) + " must be a non-empty array");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ConfigError(std::string(what) + " must hold numbers");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

GaussianMixture parse_mixture(const Json& doc) {
  if (!doc.is_object() || !doc.contains("components")) {
    throw ConfigError("mixture must be an object with 'components'");
  }
  reject_unknown_keys(doc, {"components"}, "mixture");
  std::vector<GaussianComponent> comps;
  for (const auto& c : doc.at("components")) {
    reject_unknown_keys(c, {"weight", "mean", "covariance"}, "mixture component");
    if (!c.contains("weight") || !c.contains("mean")) {
      throw ConfigError("mixture component needs 'weight' and 'mean'");
    }
    Vector mean = to_vector(c.at("mean"), "mean");
    const auto d = mean.size();
    Matrix cov = Matrix::Identity(d, d);
    if (c.contains("covariance")) {
      const Json& rows = c.at("covariance");
      if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != d) {
        throw ConfigError("covariance must be a d x d array");
      }
      for (Eigen::Index i = 0; i < d; ++i) {
        const Vector row = to_vector(rows[static_cast<std::size_t>(i)], "covariance row");
        if (row.size() != d) throw ConfigError("covariance must be a d x d array");
        cov.row(i) = row.transpose();
      }
    }
    comps.push_back({read_or<double>(c, "weight", 0.0), std::move(mean), std::move(cov)});
  }
  try {
    return GaussianMixture(std::move(comps));
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid mixture: ") + e.what());
  }
}

Json mixture_to_json(const GaussianMixture& gm) {
  Json comps = Json::array();
  for (const auto& c : gm.components()) {
    Json cov = Json::array();
    for (Eigen::Index i = 0; i < c.covariance.rows(); ++i) {
      Json row = Json::array();
      for (Eigen::Index j = 0; j < c.covariance.cols(); ++j) row.push_back(c.covariance(i, j));
      cov.push_back(std::move(row));
    }
    Json mean = Json::array();
    for (Eigen::Index i = 0; i < c.mean.size(); ++i) mean.push_back(c.mean[i]);
    comps.push_back(Json{{"weight", c.weight}, {"mean", std::move(mean)}, {"covariance", std::move(cov)}});
  }
  return Json{{"components", std::move(comps)}};
}

ObjectiveSource parse_objectives(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("'objectives' must be an object");
  reject_unknown_keys(doc, {"preset", "samples_per_target", "divergence", "mixtures", "sample_files"},
                      "objectives");
  const int sources = static_cast<int>(doc.contains("preset")) +
                      static_cast<int>(doc.contains("mixtures")) +
                      static_cast<int>(doc.contains("sample_files"));
  if (sources != 1) {
    throw ConfigError("objectives need exactly one of 'preset', 'mixtures', 'sample_files'");
  }
  ObjectiveSource src;
  if (doc.contains("preset")) {
    src.preset = read_or<std::string>(doc, "preset", "");
    if (*src.preset != kFourTargetPreset) {
      throw ConfigError("unknown objective preset '" + *src.preset + "'");
    }
    if (doc.contains("samples_per_target")) {
      src.samples_per_target = read_or<int>(doc, "samples_per_target", 0);
      if (*src.samples_per_target < 2) throw ConfigError("samples_per_target must be >= 2");
    }
    if (doc.contains("divergence")) {
      if (!src.samples_per_target) {
        throw ConfigError("'divergence' applies only together with 'samples_per_target'");
      }
      src.preset_divergence = parse_divergence(read_or<std::string>(doc, "divergence", ""));
    }
  } else {
    if (doc.contains("samples_per_target") || doc.contains("divergence")) {
      throw ConfigError("'samples_per_target' and 'divergence' apply only to presets");
    }
  }
  if (doc.contains("mixtures")) {
    const Json& arr = doc.at("mixtures");
    if (!arr.is_array() || arr.empty()) throw ConfigError("'mixtures' must be a non-empty array");
    for (const auto& m : arr) src.mixtures.push_back(parse_mixture(m));
  }
  if (doc.contains("sample_files")) {
    const Json& arr = doc.at("sample_files");
    if (!arr.is_array() || arr.empty()) {
      throw ConfigError("'sample_files' must be a non-empty array");
    }
    for (const auto& f : arr) {
      reject_unknown_keys(f, {"path", "divergence"}, "sample file");
      if (!f.contains("path")) throw ConfigError("sample file entry needs 'path'");
      src.sample_files.push_back({read_or<std::string>(f, "path", ""),
                                  parse_divergence(read_or<std::string>(f, "divergence", "kl"))});
    }
  }
  return src;
}

Json objectives_to_json(const ObjectiveSource& src) {
  if (src.preset) {
    Json out{{"preset", *src.preset}};
    if (src.samples_per_target) {
      out["samples_per_target"] = *src.samples_per_target;
      out["divergence"] = std::string(to_string(src.preset_divergence));
    }
    return out;
  }
  if (!src.mixtures.empty()) {
    Json arr = Json::array();
    for (const auto& m : src.mixtures) arr.push_back(mixture_to_json(m));
    return Json{{"mixtures", std::move(arr)}};
  }
  Json arr = Json::array();
  for (const auto& f : src.sample_files) {
    arr.push_back(Json{{"path", f.path}, {"divergence", std::string(to_string(f.divergence))}});
  }
  return Json{{"sample_files", std::move(arr)}};
}

int source_count(const ObjectiveSource& src) {
  if (src.preset) return 4;
  if (!src.mixtures.empty()) return static_cast<int>(src.mixtures.size());
  return static_cast<int>(src.sample_files.size());
}

}  // namespace

ExperimentConfig parse_experiment_config(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown_keys(doc,
                      {"version", "method", "seed", "num_particles", "dim", "num_objectives",
                       "step_size_alpha", "step_size_beta", "num_iterations", "kernel_gamma",
                       "kernel_bandwidth", "gram_normalization", "svgd_normalization",
                       "snapshot_every", "nn", "objectives", "output_dir"},
                      "config");
  ExperimentConfig cfg;
  RunConfig& run = cfg.run;
  run.method = parse_method(read_or<std::string>(doc, "method", std::string(to_string(run.method))));
  run.seed = read_seed(doc, run.seed);
  run.num_particles = read_or<int>(doc, "num_particles", run.num_particles);
  run.step_size_alpha = read_or<double>(doc, "step_size_alpha", run.step_size_alpha);
  run.step_size_beta = read_or<double>(doc, "step_size_beta", run.step_size_beta);
  run.num_iterations = read_or<int>(doc, "num_iterations", run.num_iterations);
  run.kernel_gamma = read_or<double>(doc, "kernel_gamma", run.kernel_gamma);
  run.bandwidth = parse_bandwidth_rule(
      read_or<std::string>(doc, "kernel_bandwidth", std::string(to_string(run.bandwidth))));
  run.gram_normalization = parse_gram_normalization(
      read_or<std::string>(doc, "gram_normalization", std::string(to_string(run.gram_normalization))));
  run.svgd_normalization = parse_svgd_normalization(
      read_or<std::string>(doc, "svgd_normalization", std::string(to_string(run.svgd_normalization))));
  run.snapshot_every = read_or<int>(doc, "snapshot_every", run.snapshot_every);
  if (doc.contains("nn")) {
    const Json& nn = doc.at("nn");
    if (!nn.is_object()) throw ConfigError("'nn' must be an object");
    reject_unknown_keys(nn, {"hidden_widths", "train_steps", "train_step_size", "reference_samples"},
                        "nn");
    run.nn.hidden_widths = read_or<std::vector<int>>(nn, "hidden_widths", run.nn.hidden_widths);
    run.nn.train_steps = read_or<int>(nn, "train_steps", run.nn.train_steps);
    run.nn.train_step_size = read_or<double>(nn, "train_step_size", run.nn.train_step_size);
    run.nn.reference_samples = read_or<int>(nn, "reference_samples", run.nn.reference_samples);
  }
  if (!doc.contains("objectives")) throw ConfigError("config needs an 'objectives' section");
  cfg.objectives = parse_objectives(doc.at("objectives"));
  cfg.output_dir = read_or<std::string>(doc, "output_dir", cfg.output_dir);

  const int k = source_count(cfg.objectives);
  run.num_objectives = read_or<int>(doc, "num_objectives", k);
  if (run.num_objectives != k) {
    throw ConfigError("num_objectives does not match the objective list");
  }
  int natural_dim = run.dim;
  if (cfg.objectives.preset) natural_dim = 2;
  if (!cfg.objectives.mixtures.empty()) natural_dim = cfg.objectives.mixtures.front().dim();
  run.dim = read_or<int>(doc, "dim", natural_dim);
  for (const auto& m : cfg.objectives.mixtures) {
    if (m.dim() != run.dim) throw ConfigError("mixture dimension does not match dim");
  }
  if (cfg.objectives.preset && run.dim != 2) throw ConfigError("the four-target preset is 2-D");
  run.validate();
  return cfg;
}

Json to_json(const ExperimentConfig& config) {
  const RunConfig& r = config.run;
  return Json{
      {"version", std::string(version_string())},
      {"method", std::string(to_string(r.method))},
      {"seed", r.seed},
      {"num_particles", r.num_particles},
      {"dim", r.dim},
      {"num_objectives", r.num_objectives},
      {"step_size_alpha", r.step_size_alpha},
      {"step_size_beta", r.step_size_beta},
      {"num_iterations", r.num_iterations},
      {"kernel_gamma", r.kernel_gamma},
      {"kernel_bandwidth", std::string(to_string(r.bandwidth))},
      {"gram_normalization", std::string(to_string(r.gram_normalization))},
      {"svgd_normalization", std::string(to_string(r.svgd_normalization))},
      {"snapshot_every", r.snapshot_every},
      {"nn",
       Json{{"hidden_widths", r.nn.hidden_widths},
            {"train_steps", r.nn.train_steps},
            {"train_step_size", r.nn.train_step_size},
            {"reference_samples", r.nn.reference_samples}}},
      {"objectives", objectives_to_json(config.objectives)},
      {"output_dir", config.output_dir},
  };
}

Json preset_document(std::string_view name) {
  Json doc{{"objectives", Json{{"preset", std::string(kFourTargetPreset)}}}};
  if (name == "paper-energy") {
    doc["method"] = "mwgrad-svgd";
  } else if (name == "paper-samples-kl" || name == "paper-samples-js") {
    doc["method"] = "mwgrad-nn";
    doc["objectives"]["samples_per_target"] = 30;
    doc["objectives"]["divergence"] = name == "paper-samples-kl" ? "kl" : "js";
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  return doc;
}

void apply_override(Json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override must look like key=value: '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("malformed override key '" + key + "'");
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

Json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config file '" + path.string() + "' is not valid JSON");
  return doc;
}

// ---------------------------------------------------------------------------
// Objectives and file formats
// ---------------------------------------------------------------------------

RowMatrix read_particles_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sample file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("sample file '" + path.string() + "' is empty");
  const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index n = 0;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw ConfigError("sample file '" + path.string() + "' has a non-numeric cell");
      }
      values.push_back(v);
      ++n;
    }
    if (n != cols) throw ConfigError("sample file '" + path.string() + "' has a ragged row");
    ++rows;
  }
  RowMatrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = values[static_cast<std::size_t>(i * cols + j)];
  }
  return out;
}

void write_particles_csv(const fs::path& path, const ParticleSet& particles) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (int c = 0; c < particles.dim(); ++c) out << (c ? "," : "") << 'x' << c;
  out << '\n';
  const RowMatrix& x = particles.data();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) out << (c ? "," : "") << format_double(x(i, c));
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<Objective> build_objectives(const ExperimentConfig& config) {
  std::vector<Objective> out;
  const ObjectiveSource& src = config.objectives;
  if (src.preset) {
    const auto targets = sample_targets_from_paper();
    for (std::size_t k = 0; k < targets.size(); ++k) {
      if (src.samples_per_target) {
        Rng rng = substream(config.run.seed, streams::kTargetSamples, k);
        out.emplace_back(SampleObjective(draw_target_samples(targets[k], *src.samples_per_target, rng),
                                         src.preset_divergence));
      } else {
        out.emplace_back(EnergyObjective{targets[k]});
      }
    }
  }
  for (const auto& m : src.mixtures) out.emplace_back(EnergyObjective{m});
  for (const auto& f : src.sample_files) {
    try {
      out.emplace_back(SampleObjective(read_particles_csv(f.path), f.divergence));
    } catch (const InvalidArgument& e) {
      throw ConfigError("sample file '" + f.path + "': " + e.what());
    }
  }
  check_objectives(config.run, out);
  return out;
}

std::string trace_line(const TraceRecord& record) {
  Json weights = Json::array();
  for (int k = 0; k < record.weights.size(); ++k) weights.push_back(record.weights[k]);
  Json values = Json::array();
  for (const auto& v : record.per_objective_value) {
    if (v && std::isfinite(*v)) {
      values.push_back(*v);
    } else {
      values.push_back(nullptr);
    }
  }
  const Json line{
      {"iter", record.iter},
      {"weights", std::move(weights)},
      {"stationarity", record.stationarity},
      {"grad_norm_sq", record.grad_norm_sq},
      {"per_objective_value", std::move(values)},
  };
  return line.dump();
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

namespace {

void write_outputs(const ExperimentConfig& config, const RunResult& result, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "': " + ec.message());
  {
    std::ofstream trace(out_dir / "trace.jsonl");
    if (!trace) throw IoError("cannot write trace.jsonl");
    for (const auto& rec : result.trace) trace << trace_line(rec) << '\n';
    if (!trace) throw IoError("failed writing trace.jsonl");
  }
  for (const auto& snap : result.snapshots) {
    write_particles_csv(out_dir / ("particles_" + std::to_string(snap.iter) + ".csv"), snap.particles);
  }
  std::ofstream meta(out_dir / "meta.json");
  if (!meta) throw IoError("cannot write meta.json");
  ExperimentConfig resolved = config;
  resolved.output_dir = out_dir.string();
  meta << to_json(resolved).dump(2) << '\n';
  if (!meta) throw IoError("failed writing meta.json");
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& config, const fs::path& out_dir) {
  const std::vector<Objective> objectives = build_objectives(config);
  const auto start = std::chrono::steady_clock::now();
  ExperimentOutput out{run(config.run, objectives), 0.0};
  out.wallclock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_outputs(config, out.result, out_dir);
  return out;
}

std::vector<SummaryRow> compare_methods(const ExperimentConfig& config,
                                        const std::vector<Method>& methods,
                                        const fs::path& out_dir) {
  std::vector<SummaryRow> rows;
  for (Method m : methods) {
    ExperimentConfig sub = config;
    sub.run.method = m;
    SummaryRow row{m, false, "", 0.0, 0.0, 0.0};
    try {
      const ExperimentOutput out = run_experiment(sub, out_dir / std::string(to_string(m)));
      row.ok = true;
      row.status = "ok";
      row.final_mean_dist_to_origin = mean_distance_to_origin(out.result.final_state.particles);
      row.final_stationarity = out.result.trace.back().stationarity;
      row.wallclock_seconds = out.wallclock_seconds;
    } catch (const Error& e) {
      row.status = "failed:" + std::string(e.category());
    }
    rows.push_back(std::move(row));
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "'");
  std::ofstream csv(out_dir / "summary.csv");
  if (!csv) throw IoError("cannot write summary.csv");
  csv << "method,final_mean_dist_to_origin,final_stationarity,wallclock_seconds,status\n";
  for (const auto& r : rows) {
    csv << to_string(r.method) << ',';
    if (r.ok) {
      csv << format_double(r.final_mean_dist_to_origin) << ',' << format_double(r.final_stationarity)
          << ',' << format_double(r.wallclock_seconds);
    } else {
      csv << ",,";
    }
    csv << ',' << r.status << '\n';
  }
  if (!csv) throw IoError("failed writing summary.csv");
  return rows;
}

}  // namespace mwgrad
