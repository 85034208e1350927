#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tem/cluster.hpp"
#include "tem/family.hpp"

namespace tem {

/// Effective configuration of one experiment run. JSON file values are
/// overridden by CLI flags; unset fields take the per-experiment defaults
/// applied by finalize().
struct ExperimentConfig {
  std::string experiment = "verify";  // balls|voronoi|robustness|clustering|verify|continuity
  FamilyKind family_kind = FamilyKind::t_exponential;
  std::optional<double> source_param;
  std::vector<double> t_list;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir = "out";

  int k = 9;
  std::vector<Layout> layouts = {Layout::close3x3, Layout::far3x3};
  std::vector<double> gen_t_list = {0.0, 1.0};
  std::vector<double> noise_list = {0.0, 0.1};
  int points_per_cluster = 200;
  int imbalance = 20;
  int runs = 50;
  double outlier_weight = 5000.0;
  int step_count = 12;
  double step_size = 0.3;
  int ball_radius_px = 0;  // 0 = per-experiment default (clustering 40, else 24)
  Viewport viewport = Viewport::standard_domain();
  std::vector<double> theta_grid;  // verify/continuity; per-family default if empty
  double perturb = 0.0;            // verify harness canary: additive cumulant shift

  /// Fill empty t_list/seeds/theta_grid with the experiment's defaults.
  void finalize();
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// CSV header comment: library version, FNV-1a hash of the canonical config,
/// reporting conventions.
std::string config_header(const ExperimentConfig& cfg);

struct RunArtifacts {
  std::vector<std::filesystem::path> files;
  bool ok = true;
  int failed_checks = 0;
};

// ---- verify -----------------------------------------------------------

struct VerifyRow {
  std::string family;
  std::string check;
  double t;
  double param1;
  double param2;
  double value;
  double reference;
  double discrepancy;
  double tolerance;
  bool pass;
};

std::vector<VerifyRow> verify_identities(const ExperimentConfig& cfg);

// ---- continuity --------------------------------------------------------

struct ContinuityRow {
  std::string family;
  double theta;
  std::vector<double> t_values;
  std::vector<double> abs_diff;  // |G_t - G_1| per t
  bool decreasing;
  bool final_small;  // last diff < 1e-3
};

std::vector<ContinuityRow> continuity_table(const ExperimentConfig& cfg);

// ---- robustness --------------------------------------------------------

struct RobustnessStep {
  int step;
  NaturalParam outlier;
  NaturalParam center;
  double displacement_norm;  // from the step-0 center
  double cone_angle;         // at the origin, vs the step-0 center direction
};

struct RobustnessTrace {
  double t;
  std::uint64_t seed;
  std::vector<RobustnessStep> steps;
};

std::vector<RobustnessTrace> robustness_traces(const ExperimentConfig& cfg);

// ---- clustering --------------------------------------------------------

struct ClusteringCell {
  Layout layout;
  double gen_t;
  double p_noise;
  double cluster_t;
  int n_runs = 0;
  int failures = 0;  // failed runs / undefined metrics, excluded from stats
  double p_err_mean = 0.0, p_err_std = 0.0;
  double p_split_mean = 0.0, p_split_std = 0.0;
  double bf_mean = 0.0, bf_std = 0.0;
  double z_err_vs_t1 = 0.0;  // informational two-sample z against t = 1
};

struct ClusteringRun {
  Layout layout;
  double gen_t;
  double p_noise;
  double cluster_t;
  std::uint64_t seed;
  MetricsReport metrics;
  bool loss_monotone = true;
  bool failed = false;
};

struct ClusteringProtocolResult {
  std::vector<ClusteringRun> runs;
  std::vector<ClusteringCell> cells;
};

ClusteringProtocolResult run_clustering_protocol(const ExperimentConfig& cfg);

// ---- runners (write artifacts under cfg.out_dir) -----------------------

RunArtifacts run_verify(const ExperimentConfig& cfg);
RunArtifacts run_continuity(const ExperimentConfig& cfg);
RunArtifacts run_balls(const ExperimentConfig& cfg);
RunArtifacts run_voronoi(const ExperimentConfig& cfg);
RunArtifacts run_robustness(const ExperimentConfig& cfg);
RunArtifacts run_clustering(const ExperimentConfig& cfg);
RunArtifacts run_experiment(const ExperimentConfig& cfg);

}  // namespace tem
