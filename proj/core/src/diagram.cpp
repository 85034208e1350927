#include "tem/diagram.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <thread>

#include "tem/divergence.hpp"
#include "tem/errors.hpp"

namespace tem {

const std::array<std::array<std::uint8_t, 3>, 12> kPalette = {{
    {20, 20, 24},     // background
    {230, 80, 60},    // red
    {70, 140, 220},   // blue
    {90, 180, 90},    // green
    {235, 190, 60},   // yellow
    {160, 90, 200},   // purple
    {80, 200, 200},   // cyan
    {235, 130, 50},   // orange
    {200, 100, 160},  // magenta
    {130, 130, 130},  // gray
    {110, 85, 50},    // brown
    {240, 240, 240},  // white
}};

void Viewport::validate() const {
  if (!(x_min < x_max && y_min < y_max) || width_px <= 0 || height_px <= 0) {
    throw domain_error("viewport: degenerate rectangle or pixel grid");
  }
}

namespace {

double side_divergence(const TemFamily& fam, Side side, const NaturalParam& center,
                       const NaturalParam& p) {
  return side == Side::left ? conformal(fam, center, p) : conformal(fam, p, center);
}

int thread_count(int rows) {
  unsigned hw = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("TEMCLU_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) hw = std::min<unsigned>(hw, cap);
  }
  if (hw == 0) hw = 1;
  return static_cast<int>(std::min<unsigned>(hw, std::max(1, rows / 32)));
}

template <typename RowFn>
void for_each_row(int height, const RowFn& fn) {
  const int n = thread_count(height);
  if (n <= 1) {
    for (int r = 0; r < height; ++r) fn(r);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(n);
  std::atomic<int> next{0};
  for (int i = 0; i < n; ++i) {
    workers.emplace_back([&] {
      for (int r = next.fetch_add(1); r < height; r = next.fetch_add(1)) fn(r);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace

double calibrate_radius(const TemFamily& fam, const NaturalParam& center,
                        int radius_px, Side side, const Viewport& vp) {
  vp.validate();
  if (center.dim() != 2) throw domain_error("calibration: center must be 2D");
  if (!vp.contains(center[0], center[1])) {
    throw domain_error("calibration: center outside viewport");
  }
  if (radius_px < 0) throw domain_error("calibration: negative pixel radius");
  if (radius_px == 0) return 0.0;

  const double step = vp.px_w();
  // The divergence must increase along the +x ray for the half-width to be
  // well defined; sample a few radii to confirm.
  double prev = 0.0;
  const int probes = std::min(radius_px, 8);
  for (int i = 1; i <= probes; ++i) {
    const double frac = static_cast<double>(i) / probes;
    NaturalParam q = center;
    q[0] += frac * radius_px * step;
    const double div = side_divergence(fam, side, center, q);
    if (!(div > prev)) {
      throw calibration_error("divergence not monotone along the +x ray");
    }
    prev = div;
  }
  NaturalParam boundary = center;
  boundary[0] += radius_px * step;
  return side_divergence(fam, side, center, boundary);
}

RasterGrid render_ball(const TemFamily& fam, const NaturalParam& center,
                       int radius_px, Side side, const Viewport& vp) {
  const double r = calibrate_radius(fam, center, radius_px, side, vp);
  RasterGrid grid(vp.width_px, vp.height_px);
  for_each_row(vp.height_px, [&](int row) {
    const double y = vp.y_at(row);
    for (int col = 0; col < vp.width_px; ++col) {
      const NaturalParam p = NaturalParam::of(vp.x_at(col), y);
      const double d = side_divergence(fam, side, center, p);
      grid.at(col, row) = d <= r ? 1 : 0;
    }
  });
  return grid;
}

RasterGrid render_voronoi(const TemFamily& fam,
                          const std::vector<NaturalParam>& sites, Side side,
                          const Viewport& vp) {
  vp.validate();
  if (sites.empty()) throw domain_error("voronoi: empty site list");
  RasterGrid grid(vp.width_px, vp.height_px);
  for_each_row(vp.height_px, [&](int row) {
    const double y = vp.y_at(row);
    for (int col = 0; col < vp.width_px; ++col) {
      const NaturalParam p = NaturalParam::of(vp.x_at(col), y);
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < sites.size(); ++s) {
        const double d = side_divergence(fam, side, sites[s], p);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(s);
        }
      }
      grid.at(col, row) = best + 1;
    }
  });
  return grid;
}

nlohmann::json raster_sidecar(const RasterMeta& meta) {
  nlohmann::json j;
  j["viewport"] = {{"x_min", meta.viewport.x_min}, {"x_max", meta.viewport.x_max},
                   {"y_min", meta.viewport.y_min}, {"y_max", meta.viewport.y_max},
                   {"width_px", meta.viewport.width_px},
                   {"height_px", meta.viewport.height_px}};
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& s : meta.sites) sites.push_back(s.theta);
  j["sites"] = std::move(sites);
  j["t"] = meta.t;
  j["side"] = to_string(meta.side);
  nlohmann::json palette = nlohmann::json::array();
  for (const auto& c : kPalette) palette.push_back({c[0], c[1], c[2]});
  j["palette"] = std::move(palette);
  return j;
}

void write_raster(const RasterGrid& grid, const RasterMeta& meta,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open raster for writing", path.string());
  out << "P6\n" << grid.width << " " << grid.height << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(grid.width) * 3);
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const auto& color = kPalette[grid.at(c, r) % kPalette.size()];
      row[3 * c + 0] = color[0];
      row[3 * c + 1] = color[1];
      row[3 * c + 2] = color[2];
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw io_error("failed writing raster", path.string());

  std::filesystem::path sidecar = path;
  sidecar += ".json";
  std::ofstream meta_out(sidecar);
  if (!meta_out) throw io_error("cannot open sidecar for writing", sidecar.string());
  meta_out << raster_sidecar(meta).dump(2) << "\n";
  if (!meta_out) throw io_error("failed writing sidecar", sidecar.string());
}

}  // namespace tem
