#include "tem/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tem/csv.hpp"
#include "tem/divergence.hpp"
#include "tem/errors.hpp"
#include "tem/rng.hpp"

namespace tem {

std::string to_string(Layout l) {
  return l == Layout::close3x3 ? "close3x3" : "far3x3";
}

Layout layout_from_string(const std::string& s) {
  if (s == "close3x3") return Layout::close3x3;
  if (s == "far3x3") return Layout::far3x3;
  throw domain_error("unknown layout: " + s);
}

namespace {

constexpr int kRejectionStall = 1000000;

std::vector<NaturalParam> layout_centers(Layout layout, const Viewport& vp) {
  // Grid fractions of the viewport rectangle; the far layout spreads the
  // nine centers out, the close one packs them around the middle.
  const std::array<double, 3> fr =
      layout == Layout::far3x3 ? std::array<double, 3>{0.15, 0.5, 0.85}
                               : std::array<double, 3>{0.38, 0.5, 0.62};
  std::vector<NaturalParam> centers;
  centers.reserve(9);
  for (double fy : fr) {
    for (double fx : fr) {
      centers.push_back(NaturalParam::of(vp.x_min + fx * (vp.x_max - vp.x_min),
                                         vp.y_min + fy * (vp.y_max - vp.y_min)));
    }
  }
  return centers;
}

// Half-extent s along +/-x (or y) such that the per-axis left divergence
// B(c || c +/- s) reaches r; used to bound the rejection-sampling rectangle.
double axis_extent(const TemFamily& fam, double c, double r, bool positive) {
  const Interval dom = fam.natural_domain();
  const double eps = 1e-9;
  const double cap =
      positive ? (std::isinf(dom.hi) ? 1e8 * (std::abs(c) + 1.0) : dom.hi - eps - c)
               : (std::isinf(dom.lo) ? 1e8 * (std::abs(c) + 1.0)
                                     : c - (dom.lo + eps));
  double lo = 0.0;
  double hi = std::min(cap, std::abs(c) * 0.05 + 1e-6);
  int guard = 0;
  while (conformal(fam, c, positive ? c + hi : c - hi).value < r) {
    lo = hi;
    if (hi >= cap) {
      // Pinned at the domain border on the + side (the divergence diverges
      // there); anywhere else the ball is unbounded and the radius unusable.
      if (positive) return cap;
      throw sampling_error("ball unbounded along an axis; radius too large");
    }
    hi = std::min(cap, hi * 2.0);
    if (++guard > 300) throw sampling_error("ball extent search failed");
  }
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (conformal(fam, c, positive ? c + mid : c - mid).value < r) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

// Rejection sampling of n points with B(center || p) <= r, uniform over the
// enclosing axis-aligned rectangle.
std::vector<NaturalParam> sample_ball_impl(const TemFamily& fam,
                                           const NaturalParam& center, double r,
                                           int n, Rng& rng) {
  const double ex_pos = axis_extent(fam, center[0], r, true);
  const double ex_neg = axis_extent(fam, center[0], r, false);
  const double ey_pos = axis_extent(fam, center[1], r, true);
  const double ey_neg = axis_extent(fam, center[1], r, false);
  std::vector<NaturalParam> out;
  out.reserve(n);
  int rejections = 0;
  while (static_cast<int>(out.size()) < n) {
    const double x = rng.uniform(center[0] - ex_neg, center[0] + ex_pos);
    const double y = rng.uniform(center[1] - ey_neg, center[1] + ey_pos);
    NaturalParam p = NaturalParam::of(x, y);
    if (conformal(fam, center, p) <= r) {
      out.push_back(std::move(p));
      rejections = 0;
    } else if (++rejections > kRejectionStall) {
      throw sampling_error("rejection sampling stalled; degenerate ball");
    }
  }
  return out;
}

}  // namespace

SyntheticDataset generate_clusters(const TemFamily& fam, const GeneratorConfig& cfg) {
  cfg.viewport.validate();
  if (cfg.k != 9) {
    throw domain_error("3x3 layouts require k = 9, got " + std::to_string(cfg.k));
  }
  if (cfg.points_per_cluster <= 0 || cfg.imbalance_factor <= 0) {
    throw domain_error("points_per_cluster and imbalance_factor must be positive");
  }

  SyntheticDataset ds;
  ds.true_centers = layout_centers(cfg.layout, cfg.viewport);
  Rng rng(cfg.seed);

  for (int cl = 0; cl < cfg.k; ++cl) {
    const NaturalParam& center = ds.true_centers[cl];
    const double r =
        calibrate_radius(fam, center, cfg.ball_radius_px, Side::left, cfg.viewport);
    const int n = cl == 0 ? cfg.points_per_cluster * cfg.imbalance_factor
                          : cfg.points_per_cluster;
    for (NaturalParam& p : sample_ball_impl(fam, center, r, n, rng)) {
      ds.points.push_back(std::move(p));
      ds.true_labels.push_back(cl);
      ds.noise_mask.push_back(false);
    }
  }
  return ds;
}

std::vector<NaturalParam> sample_left_ball(const TemFamily& fam,
                                           const NaturalParam& center,
                                           int radius_px, const Viewport& vp,
                                           int n, std::uint64_t seed) {
  const double r = calibrate_radius(fam, center, radius_px, Side::left, vp);
  Rng rng(seed);
  return sample_ball_impl(fam, center, r, n, rng);
}

SyntheticDataset inject_noise(const SyntheticDataset& ds, double p_noise,
                              const Rect& bounds, std::uint64_t seed) {
  if (!(p_noise >= 0.0 && p_noise < 1.0)) {
    throw domain_error("p_noise must lie in [0, 1)");
  }
  SyntheticDataset out = ds;
  if (p_noise == 0.0) return out;
  const auto count = static_cast<std::size_t>(
      std::ceil(p_noise * static_cast<double>(ds.points.size())));
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const double x = rng.uniform(bounds.x_min, bounds.x_max);
    const double y = rng.uniform(bounds.y_min, bounds.y_max);
    out.points.push_back(NaturalParam::of(x, y));
    out.true_labels.push_back(kNoiseLabel);
    out.noise_mask.push_back(true);
  }
  return out;
}

namespace {

// Per-point per-axis cumulant data reused across Lloyd passes.
struct PointCache {
  std::vector<double> g;     // G(theta)
  std::vector<double> grad;  // grad G(theta)
  std::vector<double> d;     // conformal factor
};

PointCache cache_points(const TemFamily& fam, const std::vector<NaturalParam>& pts,
                        std::size_t dim) {
  PointCache c;
  const std::size_t n = pts.size() * dim;
  c.g.resize(n);
  c.grad.resize(n);
  c.d.resize(n);
  const double omt = 1.0 - fam.temper().t;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t a = 0; a < dim; ++a) {
      const double th = pts[i][a];
      const double g = fam.cumulant(th);
      c.g[i * dim + a] = g;
      c.grad[i * dim + a] = fam.grad_cumulant(th);
      c.d[i * dim + a] = 1.0 + omt * g;
    }
  }
  return c;
}

NaturalParam f_mean(const TemFamily& fam, const std::vector<NaturalParam>& pts,
                    const std::vector<std::size_t>& members, std::size_t dim) {
  std::vector<double> out(dim);
  for (std::size_t a = 0; a < dim; ++a) {
    double m = 0.0;
    for (std::size_t idx : members) m += fam.grad_cumulant(pts[idx][a]);
    out[a] = fam.inv_grad_cumulant(m / static_cast<double>(members.size()));
  }
  return NaturalParam{std::move(out)};
}

}  // namespace

ClusterModel lloyd_cluster(const TemFamily& fam,
                           const std::vector<NaturalParam>& points, int k,
                           Side side, std::uint64_t init_seed, int max_iters) {
  if (points.empty()) throw domain_error("lloyd: empty point set");
  if (k <= 0 || static_cast<std::size_t>(k) > points.size()) {
    throw domain_error("lloyd: k must be in [1, n]");
  }
  const std::size_t dim = points.front().dim();
  const double omt = 1.0 - fam.temper().t;

  ClusterModel model;
  model.t_used = fam.temper().t;
  model.side = side;

  // Forgy initialization: k distinct data points.
  Rng rng(init_seed);
  for (std::size_t idx : rng.distinct_indices(k, points.size())) {
    model.centers.push_back(points[idx]);
  }

  const PointCache pc = cache_points(fam, points, dim);
  model.assignment.assign(points.size(), -1);

  for (int iter = 0; iter < max_iters; ++iter) {
    // Center-side cumulant data for this pass.
    const std::size_t m = model.centers.size();
    std::vector<double> cg(m * dim), cgrad(m * dim), cd(m * dim);
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t a = 0; a < dim; ++a) {
        const double th = model.centers[j][a];
        cg[j * dim + a] = fam.cumulant(th);
        cgrad[j * dim + a] = fam.grad_cumulant(th);
        cd[j * dim + a] = 1.0 + omt * cg[j * dim + a];
      }
    }

    std::vector<int> next(points.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < m; ++j) {
        double dsum = 0.0;
        for (std::size_t a = 0; a < dim; ++a) {
          const double tp = points[i][a];
          const double tc = model.centers[j][a];
          double num, den;
          if (side == Side::left) {
            num = cg[j * dim + a] - pc.g[i * dim + a] -
                  (tc - tp) * pc.grad[i * dim + a];
            den = cd[j * dim + a];
          } else {
            num = pc.g[i * dim + a] - cg[j * dim + a] -
                  (tp - tc) * cgrad[j * dim + a];
            den = pc.d[i * dim + a];
          }
          dsum += num / den;
        }
        if (dsum < best_d) {
          best_d = dsum;
          best = static_cast<int>(j);
        }
      }
      next[i] = best;
      loss += best_d;
    }
    loss /= static_cast<double>(points.size());
    model.loss_trace.push_back(loss);
    model.iterations = iter + 1;

    // Drop empty clusters, remapping labels to stay dense.
    std::vector<std::size_t> counts(m, 0);
    for (int a : next) counts[a]++;
    std::vector<int> remap(m, -1);
    std::vector<NaturalParam> kept;
    for (std::size_t j = 0; j < m; ++j) {
      if (counts[j] > 0) {
        remap[j] = static_cast<int>(kept.size());
        kept.push_back(model.centers[j]);
      }
    }
    for (int& a : next) a = remap[a];
    model.centers = std::move(kept);

    if (next == model.assignment) {
      model.converged = true;
      break;
    }
    model.assignment = std::move(next);

    // Recompute each center with the population minimizer of its members.
    std::vector<std::vector<std::size_t>> members(model.centers.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      members[model.assignment[i]].push_back(i);
    }
    for (std::size_t j = 0; j < model.centers.size(); ++j) {
      std::vector<NaturalParam> pts;
      pts.reserve(members[j].size());
      for (std::size_t idx : members[j]) pts.push_back(points[idx]);
      try {
        const WeightedPopulation pop = WeightedPopulation::uniform(std::move(pts));
        model.centers[j] = side == Side::left ? left_minimizer(fam, pop).theta_l
                                              : right_minimizer(fam, pop);
      } catch (const error&) {
        model.centers[j] = f_mean(fam, points, members[j], dim);
        model.fallback_count++;
      }
    }
  }
  return model;
}

MetricsReport compute_metrics(const TemFamily& fam, const ClusterModel& model,
                              const SyntheticDataset& ds) {
  MetricsReport rep;
  const std::size_t kt = ds.true_centers.size();
  const std::size_t kl = model.centers.size();
  if (kl == 0) {
    rep.p_err = 1.0;
    rep.p_split = 1.0;
    rep.mean_bf = std::nullopt;
    return rep;
  }

  // Confusion counts over non-noise points.
  std::vector<std::vector<std::size_t>> confusion(kt, std::vector<std::size_t>(kl, 0));
  std::vector<std::size_t> true_sizes(kt, 0);
  for (std::size_t i = 0; i < ds.points.size(); ++i) {
    if (ds.noise_mask[i]) continue;
    const int tl = ds.true_labels[i];
    confusion[tl][model.assignment[i]]++;
    true_sizes[tl]++;
  }

  double err_sum = 0.0;
  std::size_t split = 0;
  rep.per_cluster_err.reserve(kt);
  for (std::size_t c = 0; c < kt; ++c) {
    const std::size_t largest =
        *std::max_element(confusion[c].begin(), confusion[c].end());
    const double frac =
        true_sizes[c] == 0 ? 0.0
                           : static_cast<double>(largest) /
                                 static_cast<double>(true_sizes[c]);
    rep.per_cluster_err.push_back(1.0 - frac);
    err_sum += 1.0 - frac;
    if (frac < 2.0 / 3.0) split++;
  }
  rep.p_err = err_sum / static_cast<double>(kt);
  rep.p_split = static_cast<double>(split) / static_cast<double>(kt);

  // Greedy center matching on the symmetrized divergence.
  auto sym = [&](const NaturalParam& a, const NaturalParam& b) {
    return 0.5 * (conformal(fam, a, b) + conformal(fam, b, a));
  };
  std::vector<bool> true_used(kt, false), learned_used(kl, false);
  const std::size_t pairs = std::min(kt, kl);
  double bf_sum = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    double best = std::numeric_limits<double>::infinity();
    int bt = -1, bl = -1;
    for (std::size_t c = 0; c < kt; ++c) {
      if (true_used[c]) continue;
      for (std::size_t l = 0; l < kl; ++l) {
        if (learned_used[l]) continue;
        const double d = sym(ds.true_centers[c], model.centers[l]);
        if (d < best) {
          best = d;
          bt = static_cast<int>(c);
          bl = static_cast<int>(l);
        }
      }
    }
    true_used[bt] = true;
    learned_used[bl] = true;
    rep.matching.emplace_back(bt, bl);
    bf_sum += best;
  }
  rep.mean_bf = bf_sum / static_cast<double>(pairs);
  return rep;
}

namespace {

double brute_force_rec(const std::vector<std::vector<double>>& cost,
                       std::size_t t, std::size_t matched, std::size_t skips_left,
                       std::vector<bool>& used) {
  const std::size_t kt = cost.size();
  const std::size_t kl = used.size();
  const std::size_t target = std::min(kt, kl);
  if (t == kt) {
    return matched == target ? 0.0 : std::numeric_limits<double>::infinity();
  }
  double best = std::numeric_limits<double>::infinity();
  if (skips_left > 0) {
    best = brute_force_rec(cost, t + 1, matched, skips_left - 1, used);
  }
  for (std::size_t l = 0; l < kl; ++l) {
    if (used[l]) continue;
    used[l] = true;
    const double rest = brute_force_rec(cost, t + 1, matched + 1, skips_left, used);
    used[l] = false;
    best = std::min(best, cost[t][l] + rest);
  }
  return best;
}

}  // namespace

double brute_force_matching_cost(const TemFamily& fam,
                                 const std::vector<NaturalParam>& true_centers,
                                 const std::vector<NaturalParam>& learned_centers) {
  const std::size_t kt = true_centers.size();
  const std::size_t kl = learned_centers.size();
  if (kt > 6 || kl > 6) throw domain_error("brute force matcher limited to k <= 6");
  std::vector<std::vector<double>> cost(kt, std::vector<double>(kl));
  for (std::size_t c = 0; c < kt; ++c) {
    for (std::size_t l = 0; l < kl; ++l) {
      cost[c][l] = 0.5 * (conformal(fam, true_centers[c], learned_centers[l]) +
                          conformal(fam, learned_centers[l], true_centers[c]));
    }
  }
  std::vector<bool> used(kl, false);
  const std::size_t skips = kt - std::min(kt, kl);
  return brute_force_rec(cost, 0, 0, skips, used);
}

std::string dataset_to_csv(const SyntheticDataset& ds, const std::string& header) {
  CsvBuilder csv(header);
  csv.columns({"x0", "x1", "label", "noise"});
  for (std::size_t i = 0; i < ds.points.size(); ++i) {
    csv.append_row({format_double(ds.points[i][0]), format_double(ds.points[i][1]),
                    std::to_string(ds.true_labels[i]),
                    ds.noise_mask[i] ? "1" : "0"});
  }
  return csv.str();
}

std::string centers_to_csv(const ClusterModel& model, const std::string& header) {
  CsvBuilder csv(header);
  csv.columns({"center", "x0", "x1", "side", "t"});
  for (std::size_t j = 0; j < model.centers.size(); ++j) {
    csv.append_row({std::to_string(j), format_double(model.centers[j][0]),
                    format_double(model.centers[j][1]), to_string(model.side),
                    format_double(model.t_used)});
  }
  return csv.str();
}

}  // namespace tem
