#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mwgrad/optimizer.hpp"

namespace mwgrad {

using Json = nlohmann::ordered_json;

/// Version string recorded in meta.json.
std::string_view version_string();

struct SampleFileSpec {
  std::string path;
  Divergence divergence = Divergence::Kl;
};

/// Objectives come from exactly one source: inline mixtures, the built-in
/// four-target preset (optionally replaced by drawn samples), or sample files.
struct ObjectiveSource {
  std::vector<GaussianMixture> mixtures;
  std::optional<std::string> preset;
  /// With `preset`: draw this many samples per target instead of using the
  /// densities directly.
  std::optional<int> samples_per_target;
  Divergence preset_divergence = Divergence::Kl;
  std::vector<SampleFileSpec> sample_files;
};

struct ExperimentConfig {
  RunConfig run;
  ObjectiveSource objectives;
  std::string output_dir = "mwgrad-out";
};

/// Parses and validates a config document. Unknown keys are rejected; the
/// "version" key written to meta.json is ignored. Throws ConfigError.
ExperimentConfig parse_experiment_config(const Json& doc);

/// Fully resolved document; parse_experiment_config(to_json(c)) == c.
Json to_json(const ExperimentConfig& config);

/// paper-energy, paper-samples-kl, or paper-samples-js.
Json preset_document(std::string_view name);

/// Applies one `dotted.key=value` override. The value is parsed as JSON when
/// possible and kept as a string otherwise.
void apply_override(Json& doc, std::string_view assignment);

/// Reads and parses a JSON config file; a missing or malformed file is a ConfigError.
Json load_config_file(const std::filesystem::path& path);

/// Materializes the objective list. Sample presets draw from the
/// target-samples substream of the run seed.
std::vector<Objective> build_objectives(const ExperimentConfig& config);

RowMatrix read_particles_csv(const std::filesystem::path& path);
void write_particles_csv(const std::filesystem::path& path, const ParticleSet& particles);

/// One trace.jsonl line (no trailing newline).
std::string trace_line(const TraceRecord& record);

struct ExperimentOutput {
  RunResult result;
  double wallclock_seconds = 0.0;
};

/// Runs the experiment and writes trace.jsonl, particles_<iter>.csv and
/// meta.json into `out_dir`. Nothing is written unless the run completes.
ExperimentOutput run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct SummaryRow {
  Method method;
  bool ok = false;
  std::string status;
  double final_mean_dist_to_origin = 0.0;
  double final_stationarity = 0.0;
  double wallclock_seconds = 0.0;
};

/// Runs every method under the same config and seed (each into
/// out_dir/<method>/), then writes out_dir/summary.csv. Failed runs are
/// recorded as failed rows and do not stop the comparison.
std::vector<SummaryRow> compare_methods(const ExperimentConfig& config,
                                        const std::vector<Method>& methods,
                                        const std::filesystem::path& out_dir);

/// Mean Euclidean norm of the particles.
double mean_distance_to_origin(const ParticleSet& particles);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace mwgrad
