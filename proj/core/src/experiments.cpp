#include "tem/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <thread>

#include "tem/csv.hpp"
#include "tem/diagram.hpp"
#include "tem/divergence.hpp"
#include "tem/errors.hpp"
#include "tem/minimizer.hpp"
#include "tem/quadrature.hpp"
#include "tem/rng.hpp"
#include "tem/version.hpp"

namespace tem {

namespace {

int pool_threads() {
  unsigned hw = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("TEMCLU_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) hw = std::min<unsigned>(hw, cap);
  }
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs tasks[i] for all i on the pool; each task writes only its own slot,
/// so results are deterministic regardless of schedule.
void run_pool(const std::vector<std::function<void()>>& tasks) {
  const int n = std::min<int>(pool_threads(), tasks.size());
  if (n <= 1) {
    for (const auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(n);
  for (int i = 0; i < n; ++i) {
    workers.emplace_back([&] {
      for (std::size_t j = next.fetch_add(1); j < tasks.size();
           j = next.fetch_add(1)) {
        tasks[j]();
      }
    });
  }
  for (auto& w : workers) w.join();
}

std::vector<double> default_theta_grid() { return {-0.25, -0.5, -1.0, -2.0, -4.0}; }

// theta = -1 is excluded for the continuity table: the t-exponential has
// G_t(-1) = 0 identically in t, so the difference to G_1 cannot decrease.
std::vector<double> continuity_theta_grid() {
  return {-0.3, -0.5, -2.0, -3.0, -5.0};
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

void ExperimentConfig::finalize() {
  if (t_list.empty()) {
    if (experiment == "balls" || experiment == "robustness") {
      t_list = {0.0, 1.0};
    } else if (experiment == "voronoi" || experiment == "clustering") {
      t_list = {0.0, 0.5, 1.0};
    } else if (experiment == "continuity") {
      t_list = {0.9, 0.99, 0.999, 0.9999};
    } else {
      t_list = {0.0, 0.25, 0.5, 0.75, 1.0};
    }
  }
  if (seeds.empty()) seeds = {1, 2, 3, 4, 5};
  if (ball_radius_px <= 0) {
    // Clusters need enough spread for the temper to matter; the figure
    // experiments use a slimmer radius.
    ball_radius_px = experiment == "clustering" ? 40 : 24;
  }
  for (double t : t_list) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw domain_error("config: every t must lie in [0,1]");
    }
  }
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (j.contains("experiment")) cfg.experiment = j["experiment"].get<std::string>();
  if (j.contains("family")) {
    const auto& f = j["family"];
    if (f.contains("kind")) {
      cfg.family_kind = family_kind_from_string(f["kind"].get<std::string>());
    }
    if (f.contains("source_param") && !f["source_param"].is_null()) {
      cfg.source_param = f["source_param"].get<double>();
    }
  }
  if (j.contains("t_list")) cfg.t_list = j["t_list"].get<std::vector<double>>();
  if (j.contains("seeds")) {
    cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  }
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("k")) cfg.k = j["k"].get<int>();
  if (j.contains("layouts")) {
    cfg.layouts.clear();
    for (const auto& l : j["layouts"]) {
      cfg.layouts.push_back(layout_from_string(l.get<std::string>()));
    }
  }
  if (j.contains("gen_t_list")) {
    cfg.gen_t_list = j["gen_t_list"].get<std::vector<double>>();
  }
  if (j.contains("noise_list")) {
    cfg.noise_list = j["noise_list"].get<std::vector<double>>();
  }
  if (j.contains("points_per_cluster")) {
    cfg.points_per_cluster = j["points_per_cluster"].get<int>();
  }
  if (j.contains("imbalance")) cfg.imbalance = j["imbalance"].get<int>();
  if (j.contains("runs")) cfg.runs = j["runs"].get<int>();
  if (j.contains("outlier_weight")) {
    cfg.outlier_weight = j["outlier_weight"].get<double>();
  }
  if (j.contains("step_count")) cfg.step_count = j["step_count"].get<int>();
  if (j.contains("step_size")) cfg.step_size = j["step_size"].get<double>();
  if (j.contains("ball_radius_px")) {
    cfg.ball_radius_px = j["ball_radius_px"].get<int>();
  }
  if (j.contains("viewport")) {
    const auto& v = j["viewport"];
    cfg.viewport = Viewport{v.at("x_min").get<double>(), v.at("x_max").get<double>(),
                            v.at("y_min").get<double>(), v.at("y_max").get<double>(),
                            v.at("width_px").get<int>(),
                            v.at("height_px").get<int>()};
  }
  if (j.contains("theta_grid")) {
    cfg.theta_grid = j["theta_grid"].get<std::vector<double>>();
  }
  if (j.contains("perturb")) cfg.perturb = j["perturb"].get<double>();
  return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["experiment"] = cfg.experiment;
  j["family"] = {{"kind", to_string(cfg.family_kind)},
                 {"source_param", cfg.source_param
                                      ? nlohmann::json(*cfg.source_param)
                                      : nlohmann::json(nullptr)}};
  j["t_list"] = cfg.t_list;
  j["seeds"] = cfg.seeds;
  j["out_dir"] = cfg.out_dir.string();
  j["k"] = cfg.k;
  nlohmann::json layouts = nlohmann::json::array();
  for (Layout l : cfg.layouts) layouts.push_back(to_string(l));
  j["layouts"] = std::move(layouts);
  j["gen_t_list"] = cfg.gen_t_list;
  j["noise_list"] = cfg.noise_list;
  j["points_per_cluster"] = cfg.points_per_cluster;
  j["imbalance"] = cfg.imbalance;
  j["runs"] = cfg.runs;
  j["outlier_weight"] = cfg.outlier_weight;
  j["step_count"] = cfg.step_count;
  j["step_size"] = cfg.step_size;
  j["ball_radius_px"] = cfg.ball_radius_px;
  j["viewport"] = {{"x_min", cfg.viewport.x_min}, {"x_max", cfg.viewport.x_max},
                   {"y_min", cfg.viewport.y_min}, {"y_max", cfg.viewport.y_max},
                   {"width_px", cfg.viewport.width_px},
                   {"height_px", cfg.viewport.height_px}};
  j["theta_grid"] = cfg.theta_grid;
  j["perturb"] = cfg.perturb;
  return j;
}

std::string config_header(const ExperimentConfig& cfg) {
  // The hash identifies the experiment parameters; where the artifacts land
  // must not change it.
  nlohmann::json j = config_to_json(cfg);
  j.erase("out_dir");
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return "temclu " TEMCLU_VERSION " config_hash=0x" + std::string(hash) +
         " std=population rng=shared-seed-per-run-index";
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

namespace {

/// Wrapper that shifts the cumulant by a constant; breaks normalization and
/// every identity downstream. Used to prove the verify harness can fail.
class PerturbedFamily final : public TemFamily {
public:
  PerturbedFamily(FamilyPtr base, double eps)
      : TemFamily(base->temper()), base_(std::move(base)), eps_(eps) {}

  FamilyKind kind() const override { return base_->kind(); }
  std::string sufficient_statistic() const override {
    return base_->sufficient_statistic();
  }
  double cumulant(double theta) const override {
    return base_->cumulant(theta) + eps_;
  }
  double grad_cumulant(double theta) const override {
    return base_->grad_cumulant(theta);
  }
  double inv_grad_cumulant(double hbar) const override {
    return base_->inv_grad_cumulant(hbar);
  }
  double conjugate(double hbar) const override { return base_->conjugate(hbar); }
  Interval support(double theta) const override { return base_->support(theta); }
  Interval quad_interval(double theta) const override {
    return base_->quad_interval(theta);
  }
  Interval natural_domain() const override { return base_->natural_domain(); }
  double measure_scale() const override { return base_->measure_scale(); }
  double phi(double x) const override { return base_->phi(x); }

private:
  FamilyPtr base_;
  double eps_;
};

struct CheckAccumulator {
  std::vector<VerifyRow>& rows;
  void add(const std::string& family, const std::string& check, double t,
           double p1, double p2, double value, double reference, double tol) {
    const double disc = std::abs(value - reference);
    rows.push_back(
        {family, check, t, p1, p2, value, reference, disc, tol, disc <= tol});
  }
};

void verify_family(const ExperimentConfig& cfg, FamilyKind kind,
                   std::vector<VerifyRow>& rows) {
  const std::vector<double> thetas =
      cfg.theta_grid.empty() ? default_theta_grid() : cfg.theta_grid;
  CheckAccumulator acc{rows};
  const std::string fname = to_string(kind);

  for (double t : cfg.t_list) {
    FamilyPtr fam = make_family(kind, t);
    if (cfg.perturb != 0.0) {
      fam = std::make_shared<PerturbedFamily>(fam, cfg.perturb);
    }
    const auto oracle = QuadratureFamily::oracle_for(*fam);
    const Temper tp = fam->temper();
    const double scale = fam->measure_scale();

    for (double theta : thetas) {
      // Closed-form cumulant against the quadrature oracle.
      const double g = fam->cumulant(theta);
      acc.add(fname, "cumulant_vs_quadrature", t, theta, 0.0, g,
              oracle->cumulant(theta), 1e-8 * std::max(1.0, std::abs(g)));

      // Theorem-1 normalization of the co-density through the closed form.
      const Interval iv = fam->quad_interval(theta);
      const double codensity = integrate(
          [&](double x) {
            return scale * std::pow(fam->density(theta, x), 2.0 - tp.t);
          },
          iv.lo, iv.hi);
      acc.add(fname, "codensity_normalization", t, theta, 0.0, codensity, 1.0,
              1e-6);

      // Total mass: quadrature against both closed forms of the mass lemma.
      const double mass_quad = integrate(
          [&](double x) { return scale * fam->density(theta, x); }, iv.lo, iv.hi);
      acc.add(fname, "mass_primal", t, theta, 0.0, fam->total_mass(theta),
              mass_quad, 1e-6);
      acc.add(fname, "mass_dual", t, theta, 0.0, fam->total_mass_dual(theta),
              mass_quad, 1e-6);

      // Legendre identity.
      const double hb = fam->grad_cumulant(theta);
      acc.add(fname, "legendre", t, theta, 0.0,
              g + fam->conjugate(hb) - theta * hb, 0.0, 1e-9);

      // Gradient against central differences.
      const double h = 1e-5 * std::abs(theta);
      const double fd =
          (fam->cumulant(theta + h) - fam->cumulant(theta - h)) / (2.0 * h);
      acc.add(fname, "grad_finite_difference", t, theta, 0.0, hb, fd,
              1e-6 * std::max(1.0, std::abs(hb)));

      // Conformal-factor / mass link.
      acc.add(fname, "eq20_mass_link", t, theta, 0.0,
              conformal_factor_mass_link(*fam, theta), 0.0, 1e-6);
    }

    // Pair checks: f-divergence vs conformal divergence, and the swap
    // identity against the density-level psi-Bregman divergence. Pairs put
    // the wider-support member on the hat side, where the tempered ratio
    // never clamps and the identity applies (see f_divergence_compatible).
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i + 1 < thetas.size(); ++i) {
      pairs.emplace_back(thetas[i], thetas[i + 1]);
    }
    pairs.emplace_back(thetas.front(), thetas[std::min<std::size_t>(3, thetas.size() - 1)]);
    for (const auto& [th_hat, th] : pairs) {
      if (!f_divergence_compatible(*fam, th_hat, th)) continue;
      const double b = conformal(*fam, th_hat, th).value;
      acc.add(fname, "theorem2_f_vs_b", t, th_hat, th,
              tempered_f_divergence(*fam, th_hat, th), b, 1e-5);
      acc.add(fname, "psi_swap", t, th_hat, th, psi_bregman(*fam, th, th_hat), b,
              1e-5);
    }
  }
}

}  // namespace

std::vector<VerifyRow> verify_identities(const ExperimentConfig& cfg) {
  std::vector<VerifyRow> rows;
  verify_family(cfg, FamilyKind::t_exponential, rows);
  verify_family(cfg, FamilyKind::t_gaussian_mu0, rows);
  return rows;
}

// ---------------------------------------------------------------------------
// continuity
// ---------------------------------------------------------------------------

std::vector<ContinuityRow> continuity_table(const ExperimentConfig& cfg) {
  const std::vector<double> thetas =
      cfg.theta_grid.empty() ? continuity_theta_grid() : cfg.theta_grid;
  std::vector<ContinuityRow> rows;
  for (FamilyKind kind :
       {FamilyKind::t_exponential, FamilyKind::t_gaussian_mu0}) {
    FamilyPtr classical = make_family(kind, 1.0);
    for (double theta : thetas) {
      ContinuityRow row;
      row.family = to_string(kind);
      row.theta = theta;
      const double g1 = classical->cumulant(theta);
      for (double t : cfg.t_list) {
        row.t_values.push_back(t);
        row.abs_diff.push_back(std::abs(make_family(kind, t)->cumulant(theta) - g1));
      }
      row.decreasing = true;
      for (std::size_t i = 1; i < row.abs_diff.size(); ++i) {
        if (!(row.abs_diff[i] < row.abs_diff[i - 1])) row.decreasing = false;
      }
      row.final_small = !row.abs_diff.empty() && row.abs_diff.back() < 1e-3;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// robustness
// ---------------------------------------------------------------------------

std::vector<RobustnessTrace> robustness_traces(const ExperimentConfig& cfg) {
  std::vector<std::pair<double, std::uint64_t>> jobs;
  for (double t : cfg.t_list) {
    for (std::uint64_t seed : cfg.seeds) jobs.emplace_back(t, seed);
  }
  std::vector<RobustnessTrace> traces(jobs.size());
  std::vector<std::function<void()>> tasks;
  tasks.reserve(jobs.size());
  const NaturalParam ball_center = NaturalParam::of(
      0.5 * (cfg.viewport.x_min + cfg.viewport.x_max),
      0.5 * (cfg.viewport.y_min + cfg.viewport.y_max));

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    tasks.emplace_back([&, j] {
      const auto [t, seed] = jobs[j];
      FamilyPtr fam = make_family(cfg.family_kind, t);
      std::vector<NaturalParam> pts = sample_left_ball(
          *fam, ball_center, cfg.ball_radius_px, cfg.viewport, 200, seed);

      // Outlier: the sampled point closest to the unweighted left minimizer,
      // carrying outlier_weight times the weight of every other point.
      const NaturalParam base_center =
          left_minimizer(*fam, WeightedPopulation::uniform(pts)).theta_l;
      std::size_t out_idx = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        double d2 = 0.0;
        for (std::size_t a = 0; a < pts[i].dim(); ++a) {
          const double diff = pts[i][a] - base_center[a];
          d2 += diff * diff;
        }
        if (d2 < best) {
          best = d2;
          out_idx = i;
        }
      }

      // Random drift direction into the quadrant (both components negative).
      Rng rng(seed ^ 0x5bd1e995u);
      const double phi_angle = M_PI * (1.0 + 0.5 * rng.uniform01());
      const double dx = std::cos(phi_angle) * cfg.step_size;
      const double dy = std::sin(phi_angle) * cfg.step_size;

      std::vector<double> weights(pts.size(), 1.0);
      weights[out_idx] = cfg.outlier_weight;

      RobustnessTrace trace;
      trace.t = t;
      trace.seed = seed;
      const NaturalParam outlier0 = pts[out_idx];
      NaturalParam center0;
      for (int step = 0; step <= cfg.step_count; ++step) {
        std::vector<NaturalParam> moved = pts;
        moved[out_idx][0] = outlier0[0] + step * dx;
        moved[out_idx][1] = outlier0[1] + step * dy;
        const WeightedPopulation pop =
            WeightedPopulation::weighted(moved, weights);
        const NaturalParam center = left_minimizer(*fam, pop).theta_l;
        if (step == 0) center0 = center;
        double disp = 0.0, dot = 0.0, n0 = 0.0, n1 = 0.0;
        for (std::size_t a = 0; a < center.dim(); ++a) {
          const double d = center[a] - center0[a];
          disp += d * d;
          dot += center[a] * center0[a];
          n0 += center0[a] * center0[a];
          n1 += center[a] * center[a];
        }
        const double cosang =
            std::clamp(dot / std::sqrt(n0 * n1), -1.0, 1.0);
        trace.steps.push_back({step, moved[out_idx], center, std::sqrt(disp),
                               std::acos(cosang)});
      }
      traces[j] = std::move(trace);
    });
  }
  run_pool(tasks);
  return traces;
}

// ---------------------------------------------------------------------------
// clustering protocol
// ---------------------------------------------------------------------------

ClusteringProtocolResult run_clustering_protocol(const ExperimentConfig& cfg) {
  struct Job {
    Layout layout;
    double gen_t;
    double p_noise;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Layout layout : cfg.layouts) {
    for (double gen_t : cfg.gen_t_list) {
      for (double p_noise : cfg.noise_list) {
        for (int r = 0; r < cfg.runs; ++r) {
          jobs.push_back({layout, gen_t, p_noise, cfg.seeds.front() + r});
        }
      }
    }
  }

  const std::size_t per_job = cfg.t_list.size();
  std::vector<ClusteringRun> runs(jobs.size() * per_job);
  std::vector<std::function<void()>> tasks;
  tasks.reserve(jobs.size());
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    tasks.emplace_back([&, j] {
      const Job& job = jobs[j];
      SyntheticDataset ds;
      bool gen_failed = false;
      try {
        FamilyPtr gen_fam = make_family(cfg.family_kind, job.gen_t);
        GeneratorConfig gc;
        gc.k = cfg.k;
        gc.layout = job.layout;
        gc.points_per_cluster = cfg.points_per_cluster;
        gc.imbalance_factor = cfg.imbalance;
        gc.ball_radius_px = cfg.ball_radius_px;
        gc.seed = job.seed;
        gc.viewport = cfg.viewport;
        ds = generate_clusters(*gen_fam, gc);
        if (job.p_noise > 0.0) {
          const Rect bounds{cfg.viewport.x_min, cfg.viewport.x_max,
                            cfg.viewport.y_min, cfg.viewport.y_max};
          ds = inject_noise(ds, job.p_noise, bounds, job.seed ^ 0x9e3779b97f4a7c15ULL);
        }
      } catch (const error&) {
        gen_failed = true;
      }
      for (std::size_t ti = 0; ti < per_job; ++ti) {
        ClusteringRun& run = runs[j * per_job + ti];
        run.layout = job.layout;
        run.gen_t = job.gen_t;
        run.p_noise = job.p_noise;
        run.cluster_t = cfg.t_list[ti];
        run.seed = job.seed;
        if (gen_failed) {
          run.failed = true;
          continue;
        }
        try {
          FamilyPtr fam = make_family(cfg.family_kind, cfg.t_list[ti]);
          const ClusterModel model =
              lloyd_cluster(*fam, ds.points, cfg.k, Side::left, job.seed);
          run.metrics = compute_metrics(*fam, model, ds);
          for (std::size_t s = 1; s < model.loss_trace.size(); ++s) {
            if (model.loss_trace[s] > model.loss_trace[s - 1] + 1e-12) {
              run.loss_monotone = false;
            }
          }
        } catch (const error&) {
          run.failed = true;
        }
      }
    });
  }
  run_pool(tasks);

  ClusteringProtocolResult result;
  result.runs = std::move(runs);

  // Aggregate per cell (population std, divisor n).
  for (Layout layout : cfg.layouts) {
    for (double gen_t : cfg.gen_t_list) {
      for (double p_noise : cfg.noise_list) {
        std::vector<ClusteringCell> cells;
        for (double t : cfg.t_list) {
          ClusteringCell cell;
          cell.layout = layout;
          cell.gen_t = gen_t;
          cell.p_noise = p_noise;
          cell.cluster_t = t;
          std::vector<double> errs, splits, bfs;
          for (const ClusteringRun& run : result.runs) {
            if (run.layout != layout || run.gen_t != gen_t ||
                run.p_noise != p_noise || run.cluster_t != t) {
              continue;
            }
            if (run.failed || !run.metrics.mean_bf) {
              cell.failures++;
              continue;
            }
            errs.push_back(run.metrics.p_err);
            splits.push_back(run.metrics.p_split);
            bfs.push_back(*run.metrics.mean_bf);
          }
          auto mean_std = [](const std::vector<double>& v) {
            if (v.empty()) return std::pair{0.0, 0.0};
            double m = 0.0;
            for (double x : v) m += x;
            m /= v.size();
            double s = 0.0;
            for (double x : v) s += (x - m) * (x - m);
            return std::pair{m, std::sqrt(s / v.size())};
          };
          cell.n_runs = static_cast<int>(errs.size());
          std::tie(cell.p_err_mean, cell.p_err_std) = mean_std(errs);
          std::tie(cell.p_split_mean, cell.p_split_std) = mean_std(splits);
          std::tie(cell.bf_mean, cell.bf_std) = mean_std(bfs);
          cells.push_back(cell);
        }
        // Informational z column against the t = 1 cell of the same block.
        const ClusteringCell* ref = nullptr;
        for (const auto& c : cells) {
          if (c.cluster_t == 1.0) ref = &c;
        }
        for (auto& c : cells) {
          if (ref && c.n_runs > 0 && ref->n_runs > 0) {
            const double se =
                std::sqrt(c.p_err_std * c.p_err_std / c.n_runs +
                          ref->p_err_std * ref->p_err_std / ref->n_runs);
            c.z_err_vs_t1 = se > 0.0 ? (c.p_err_mean - ref->p_err_mean) / se : 0.0;
          }
          result.cells.push_back(c);
        }
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// runners
// ---------------------------------------------------------------------------

namespace {

std::filesystem::path ensure_out_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw io_error("cannot create output directory", cfg.out_dir.string());
  return cfg.out_dir;
}

std::string t_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", t);
  std::string s = buf;
  for (char& c : s) {
    if (c == '.') c = 'p';
  }
  return s;
}

}  // namespace

RunArtifacts run_verify(const ExperimentConfig& cfg) {
  const auto dir = ensure_out_dir(cfg);
  const std::vector<VerifyRow> rows = verify_identities(cfg);
  CsvBuilder csv(config_header(cfg));
  csv.columns({"family", "check", "t", "param1", "param2", "value", "reference",
               "discrepancy", "tolerance", "pass"});
  RunArtifacts art;
  for (const VerifyRow& r : rows) {
    csv.append_row({r.family, r.check, fmt(r.t), fmt(r.param1), fmt(r.param2),
                    fmt(r.value), fmt(r.reference), fmt(r.discrepancy),
                    fmt(r.tolerance), r.pass ? "1" : "0"});
    if (!r.pass) art.failed_checks++;
  }
  const auto path = dir / "verify.csv";
  csv.write(path);
  art.files.push_back(path);
  art.ok = art.failed_checks == 0;
  return art;
}

RunArtifacts run_continuity(const ExperimentConfig& cfg) {
  const auto dir = ensure_out_dir(cfg);
  const auto rows = continuity_table(cfg);
  CsvBuilder csv(config_header(cfg));
  csv.columns({"family", "theta", "t", "abs_diff", "decreasing", "final_small"});
  RunArtifacts art;
  for (const ContinuityRow& row : rows) {
    for (std::size_t i = 0; i < row.t_values.size(); ++i) {
      csv.append_row({row.family, fmt(row.theta), fmt(row.t_values[i]),
                      fmt(row.abs_diff[i]), row.decreasing ? "1" : "0",
                      row.final_small ? "1" : "0"});
    }
    if (!row.decreasing || !row.final_small) art.failed_checks++;
  }
  const auto path = dir / "continuity.csv";
  csv.write(path);
  art.files.push_back(path);
  art.ok = art.failed_checks == 0;
  return art;
}

RunArtifacts run_balls(const ExperimentConfig& cfg) {
  const auto dir = ensure_out_dir(cfg);
  RunArtifacts art;
  const std::vector<NaturalParam> centers = {
      NaturalParam::of(-2.8, -2.8), NaturalParam::of(-2.8, -0.7),
      NaturalParam::of(-0.7, -2.8), NaturalParam::of(-0.9, -0.9)};
  for (double t : cfg.t_list) {
    FamilyPtr fam = make_family(cfg.family_kind, t);
    for (Side side : {Side::left, Side::right}) {
      for (std::size_t c = 0; c < centers.size(); ++c) {
        const RasterGrid grid =
            render_ball(*fam, centers[c], cfg.ball_radius_px, side, cfg.viewport);
        const auto path = dir / ("balls_t" + t_tag(t) + "_" + to_string(side) +
                                 "_c" + std::to_string(c) + ".ppm");
        write_raster(grid, {cfg.viewport, {centers[c]}, t, side}, path);
        art.files.push_back(path);
      }
    }
  }
  return art;
}

RunArtifacts run_voronoi(const ExperimentConfig& cfg) {
  const auto dir = ensure_out_dir(cfg);
  RunArtifacts art;
  const double cx = 0.5 * (cfg.viewport.x_min + cfg.viewport.x_max);
  const double cy = 0.5 * (cfg.viewport.y_min + cfg.viewport.y_max);
  const double rho =
      0.3 * std::min(cfg.viewport.x_max - cfg.viewport.x_min,
                     cfg.viewport.y_max - cfg.viewport.y_min);
  for (int step = 0; step < 5; ++step) {
    // Pentagon rotated by a fifth of its vertex spacing per step.
    const double offset = step * 2.0 * M_PI / 25.0;
    std::vector<NaturalParam> sites;
    for (int v = 0; v < 5; ++v) {
      const double ang = offset + v * 2.0 * M_PI / 5.0;
      sites.push_back(
          NaturalParam::of(cx + rho * std::cos(ang), cy + rho * std::sin(ang)));
    }
    for (double t : cfg.t_list) {
      FamilyPtr fam = make_family(cfg.family_kind, t);
      for (Side side : {Side::left, Side::right}) {
        const RasterGrid grid = render_voronoi(*fam, sites, side, cfg.viewport);
        const auto path = dir / ("voronoi_t" + t_tag(t) + "_" + to_string(side) +
                                 "_rot" + std::to_string(step) + ".ppm");
        write_raster(grid, {cfg.viewport, sites, t, side}, path);
        art.files.push_back(path);
      }
    }
  }
  return art;
}

RunArtifacts run_robustness(const ExperimentConfig& cfg) {
  const auto dir = ensure_out_dir(cfg);
  const auto traces = robustness_traces(cfg);
  CsvBuilder csv(config_header(cfg));
  csv.columns({"t", "seed", "step", "outlier_x", "outlier_y", "center_x",
               "center_y", "displacement_norm", "cone_angle"});
  for (const RobustnessTrace& tr : traces) {
    for (const RobustnessStep& s : tr.steps) {
      csv.append_row({fmt(tr.t), std::to_string(tr.seed), std::to_string(s.step),
                      fmt(s.outlier[0]), fmt(s.outlier[1]), fmt(s.center[0]),
                      fmt(s.center[1]), fmt(s.displacement_norm),
                      fmt(s.cone_angle)});
    }
  }
  RunArtifacts art;
  const auto path = dir / "robustness.csv";
  csv.write(path);
  art.files.push_back(path);
  return art;
}

RunArtifacts run_clustering(const ExperimentConfig& cfg) {
  const auto dir = ensure_out_dir(cfg);
  const ClusteringProtocolResult result = run_clustering_protocol(cfg);

  CsvBuilder runs_csv(config_header(cfg));
  runs_csv.columns({"layout", "gen_t", "p_noise", "cluster_t", "seed", "p_err",
                    "p_split", "mean_bf", "loss_monotone", "failed"});
  for (const ClusteringRun& r : result.runs) {
    runs_csv.append_row(
        {to_string(r.layout), fmt(r.gen_t), fmt(r.p_noise), fmt(r.cluster_t),
         std::to_string(r.seed), fmt(r.metrics.p_err), fmt(r.metrics.p_split),
         r.metrics.mean_bf ? fmt(*r.metrics.mean_bf) : "nan",
         r.loss_monotone ? "1" : "0", r.failed ? "1" : "0"});
  }
  CsvBuilder cells_csv(config_header(cfg));
  cells_csv.columns({"layout", "gen_t", "p_noise", "cluster_t", "n_runs",
                     "failures", "p_err_mean", "p_err_std", "p_split_mean",
                     "p_split_std", "bf_mean", "bf_std", "z_err_vs_t1"});
  for (const ClusteringCell& c : result.cells) {
    cells_csv.append_row({to_string(c.layout), fmt(c.gen_t), fmt(c.p_noise),
                          fmt(c.cluster_t), std::to_string(c.n_runs),
                          std::to_string(c.failures), fmt(c.p_err_mean),
                          fmt(c.p_err_std), fmt(c.p_split_mean),
                          fmt(c.p_split_std), fmt(c.bf_mean), fmt(c.bf_std),
                          fmt(c.z_err_vs_t1)});
  }
  RunArtifacts art;
  const auto runs_path = dir / "clustering_runs.csv";
  const auto cells_path = dir / "clustering_summary.csv";
  runs_csv.write(runs_path);
  cells_csv.write(cells_path);
  art.files = {runs_path, cells_path};

  // One example dataset and fitted centers per generation cell (first seed).
  const std::string header = config_header(cfg);
  for (Layout layout : cfg.layouts) {
    for (double gen_t : cfg.gen_t_list) {
      for (double p_noise : cfg.noise_list) {
        FamilyPtr gen_fam = make_family(cfg.family_kind, gen_t);
        GeneratorConfig gc;
        gc.k = cfg.k;
        gc.layout = layout;
        gc.points_per_cluster = cfg.points_per_cluster;
        gc.imbalance_factor = cfg.imbalance;
        gc.ball_radius_px = cfg.ball_radius_px;
        gc.seed = cfg.seeds.front();
        gc.viewport = cfg.viewport;
        SyntheticDataset ds = generate_clusters(*gen_fam, gc);
        if (p_noise > 0.0) {
          const Rect bounds{cfg.viewport.x_min, cfg.viewport.x_max,
                            cfg.viewport.y_min, cfg.viewport.y_max};
          ds = inject_noise(ds, p_noise, bounds,
                            cfg.seeds.front() ^ 0x9e3779b97f4a7c15ULL);
        }
        const std::string cell_tag = to_string(layout) + "_gen" + t_tag(gen_t) +
                                     "_noise" + t_tag(p_noise);
        const auto ds_path = dir / ("dataset_" + cell_tag + ".csv");
        {
          std::ofstream out(ds_path, std::ios::binary);
          out << dataset_to_csv(ds, header);
        }
        art.files.push_back(ds_path);
        for (double t : cfg.t_list) {
          FamilyPtr fam = make_family(cfg.family_kind, t);
          const ClusterModel model =
              lloyd_cluster(*fam, ds.points, cfg.k, Side::left, cfg.seeds.front());
          const auto c_path = dir / ("centers_" + cell_tag + "_t" + t_tag(t) + ".csv");
          std::ofstream out(c_path, std::ios::binary);
          out << centers_to_csv(model, header);
          art.files.push_back(c_path);
        }
      }
    }
  }
  return art;
}

RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment == "verify") return run_verify(cfg);
  if (cfg.experiment == "continuity") return run_continuity(cfg);
  if (cfg.experiment == "balls") return run_balls(cfg);
  if (cfg.experiment == "voronoi") return run_voronoi(cfg);
  if (cfg.experiment == "robustness") return run_robustness(cfg);
  if (cfg.experiment == "clustering") return run_clustering(cfg);
  throw domain_error("unknown experiment: " + cfg.experiment);
}

}  // namespace tem
