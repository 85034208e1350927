#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tem/diagram.hpp"
#include "tem/family.hpp"
#include "tem/minimizer.hpp"

namespace tem {

enum class Layout { close3x3, far3x3 };

std::string to_string(Layout l);
Layout layout_from_string(const std::string& s);

/// Reserved label for noise points; excluded from every metric.
constexpr int kNoiseLabel = -1;

struct SyntheticDataset {
  std::vector<NaturalParam> points;
  std::vector<int> true_labels;          // kNoiseLabel for noise
  std::vector<NaturalParam> true_centers;
  std::vector<bool> noise_mask;

  std::size_t size() const { return points.size(); }
};

struct GeneratorConfig {
  int k = 9;
  Layout layout = Layout::far3x3;
  int points_per_cluster = 200;
  int imbalance_factor = 20;   // one cluster gets this many times more points
  int ball_radius_px = 24;
  std::uint64_t seed = 1;
  Viewport viewport = Viewport::standard_domain();
};

/// Deterministically samples k clusters uniformly (by rejection) inside
/// left-center divergence balls of pixel-calibrated radius around the 3x3
/// layout centers. Cluster 0 carries imbalance_factor times the points.
SyntheticDataset generate_clusters(const TemFamily& fam, const GeneratorConfig& cfg);

/// n points sampled uniformly (by rejection) in the left-center ball of
/// pixel-calibrated radius around `center`.
std::vector<NaturalParam> sample_left_ball(const TemFamily& fam,
                                           const NaturalParam& center,
                                           int radius_px, const Viewport& vp,
                                           int n, std::uint64_t seed);

struct Rect {
  double x_min, x_max, y_min, y_max;
};

/// Adds ceil(p_noise * |points|) uniform points over `bounds` with the
/// reserved noise label. p_noise must lie in [0, 1).
SyntheticDataset inject_noise(const SyntheticDataset& ds, double p_noise,
                              const Rect& bounds, std::uint64_t seed);

struct ClusterModel {
  std::vector<NaturalParam> centers;
  std::vector<int> assignment;        // point index -> center index
  std::vector<double> loss_trace;     // mean min-divergence after each pass
  double t_used = 1.0;
  Side side = Side::left;
  int iterations = 0;
  int fallback_count = 0;             // center solves that fell back to the f-mean
  bool converged = false;
};

/// Lloyd iterations under the conformal divergence: Forgy initialization,
/// side-consistent assignment (left: argmin_j B(center_j || point); right:
/// argmin_j B(point || center_j)), centers recomputed by the matching
/// population minimizer, empty clusters dropped. Stops when the assignment
/// is stable or after max_iters passes.
ClusterModel lloyd_cluster(const TemFamily& fam,
                           const std::vector<NaturalParam>& points, int k,
                           Side side, std::uint64_t init_seed, int max_iters = 100);

struct MetricsReport {
  double p_err = 0.0;
  double p_split = 0.0;
  std::optional<double> mean_bf;                 // empty when no learned centers
  std::vector<std::pair<int, int>> matching;     // (true idx, learned idx)
  std::vector<double> per_cluster_err;           // 1 - largest overlap, per true cluster
};

/// The three evaluation metrics, noise excluded throughout. mean_bf uses
/// greedy matching on the symmetrized conformal divergence of centers
/// (a partial injection of true centers into learned centers).
MetricsReport compute_metrics(const TemFamily& fam, const ClusterModel& model,
                              const SyntheticDataset& ds);

/// Exhaustive optimal matching for small k; test oracle for the greedy one.
double brute_force_matching_cost(const TemFamily& fam,
                                 const std::vector<NaturalParam>& true_centers,
                                 const std::vector<NaturalParam>& learned_centers);

/// CSV serializations (header comment + column row first).
std::string dataset_to_csv(const SyntheticDataset& ds, const std::string& header);
std::string centers_to_csv(const ClusterModel& model, const std::string& header);

}  // namespace tem
