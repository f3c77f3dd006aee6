#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pq/mc.hpp"
#include "pq/model.hpp"

namespace pq {

enum class Estimator { kExact, kQueueMc, kFirstPassage, kTilted, kHeavyMc };
enum class Asymptotic { kCramer, kHeavySeries };

std::string to_string(Estimator e);
std::string to_string(Asymptotic a);

struct DirectionSpec {
  Vec2 eta{};
  std::vector<std::int64_t> n_values;
};

struct Tolerances {
  double exact_tol = 1e-12;
  std::uint64_t exact_max_iter = 200'000;
  double eps_trunc = 1e-6;
  double eps_stop = 1e-9;
  double series_rel_tol = 1e-6;
  double rate_rel_tol = 0.10;
};

struct Sampling {
  std::uint64_t queue_reps = 32;
  std::uint64_t queue_horizon = 1'000'000;
  std::uint64_t queue_burnin = 10'000;
  std::uint64_t first_passage_reps = 100'000;
  std::uint64_t tilted_reps = 20'000;
  std::uint64_t tilted_step_cap = 100'000;
  std::uint64_t heavy_reps = 100'000;
  std::uint64_t heavy_horizon_cap = 1'000'000;
  double heavy_retire_eps = 0.0;
};

struct ExperimentConfig {
  std::optional<std::string> preset;
  nlohmann::json model;  // {"arrival":..., "service1":..., "service2":...}, preset already expanded
  std::vector<Point> points;
  std::optional<DirectionSpec> direction;
  std::vector<Estimator> estimators;
  std::vector<Asymptotic> asymptotics;
  Tolerances tolerances;
  Sampling sampling;
  std::optional<std::size_t> truncation;  // grid size N for both axes; default from the Lundberg bound
  std::uint64_t seed = 1;
  unsigned threads = 1;

  /// The (x, y) pairs in evaluation order, with the n each came from when a
  /// direction was given.
  std::vector<std::pair<Point, std::optional<std::int64_t>>> resolved_points() const;
};

/// Throws ConfigError on unknown keys, bad types or an unstable model.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Resolved config as JSON (presets expanded, every default written out).
nlohmann::json to_json(const ExperimentConfig& cfg);

Pmf pmf_from_json(const nlohmann::json& j);
nlohmann::json pmf_to_json(const Pmf& d);
ParallelQueueModel build_model(const ExperimentConfig& cfg);

/// Named presets: bernoulli-case, geometric-case, heavy-case.
nlohmann::json preset_model(const std::string& name);

struct RunResult {
  bool all_pass = true;
  nlohmann::json summary;
};

/// Runs the configured estimators and asymptotics and writes estimates.csv,
/// summary.json and (with the exact estimator) grid.csv and grid.bin into
/// out_dir. Outputs depend only on the config, never on threads or timing.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Stream seed for estimator e at point index i, derived from the base seed.
std::uint64_t derive_seed(std::uint64_t base, Estimator e, std::size_t point_index);

}  // namespace pq
