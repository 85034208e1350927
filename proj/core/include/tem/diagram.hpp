#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tem/family.hpp"
#include "tem/minimizer.hpp"

namespace tem {

/// Axis-aligned window in natural-parameter space mapped affinely onto a
/// pixel grid. Pixel (col, row) samples the cell center; row 0 is the top
/// of the image (largest y).
struct Viewport {
  double x_min, x_max;
  double y_min, y_max;
  int width_px;
  int height_px;

  static Viewport standard_domain(int width = 512, int height = 512) {
    return {-4.0, -0.1, -4.0, -0.1, width, height};
  }

  double px_w() const { return (x_max - x_min) / width_px; }
  double px_h() const { return (y_max - y_min) / height_px; }
  double x_at(int col) const { return x_min + (col + 0.5) * px_w(); }
  double y_at(int row) const { return y_max - (row + 0.5) * px_h(); }
  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  void validate() const;
};

/// Dense grid of small-integer labels. 0 is reserved for background;
/// Voronoi cells are labeled site_index + 1, ball membership uses 0/1.
struct RasterGrid {
  int width = 0;
  int height = 0;
  std::vector<int> labels;

  RasterGrid() = default;
  RasterGrid(int w, int h) : width(w), height(h), labels(w * h, 0) {}
  int& at(int col, int row) { return labels[row * width + col]; }
  int at(int col, int row) const { return labels[row * width + col]; }
};

/// Fixed 12-color palette; index 0 is the background color.
extern const std::array<std::array<std::uint8_t, 3>, 12> kPalette;

/// Divergence threshold that makes the side-appropriate ball around center
/// span radius_px pixels of horizontal half-width through the center.
/// Verifies monotonicity of the divergence along the +x ray and throws
/// calibration_error if it fails.
double calibrate_radius(const TemFamily& fam, const NaturalParam& center,
                        int radius_px, Side side, const Viewport& vp);

/// Rasterize the divergence ball with pixel-calibrated radius.
/// Left: pixels p with B(center || p) <= r; right: B(p || center) <= r.
RasterGrid render_ball(const TemFamily& fam, const NaturalParam& center,
                       int radius_px, Side side, const Viewport& vp);

/// Rasterize the Voronoi diagram over the sites; per pixel, argmin of the
/// side-appropriate divergence, ties resolved toward the lowest site index.
RasterGrid render_voronoi(const TemFamily& fam,
                          const std::vector<NaturalParam>& sites, Side side,
                          const Viewport& vp);

struct RasterMeta {
  Viewport viewport;
  std::vector<NaturalParam> sites;
  double t = 1.0;
  Side side = Side::left;
};

/// Binary PPM (P6) with the fixed palette plus a ".json" sidecar carrying
/// {viewport, sites, t, side, palette}. Byte-identical for identical inputs.
void write_raster(const RasterGrid& grid, const RasterMeta& meta,
                  const std::filesystem::path& path);

/// Sidecar JSON for a raster written to `path`.
nlohmann::json raster_sidecar(const RasterMeta& meta);

}  // namespace tem
