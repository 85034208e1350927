#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "tem/diagram.hpp"
#include "tem/divergence.hpp"

using namespace tem;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "temclu_diagram_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

// Boundary pixels of a two-label grid: label changes to the right or below.
std::vector<std::pair<int, int>> boundary_pixels(const RasterGrid& g) {
  std::vector<std::pair<int, int>> out;
  for (int r = 0; r + 1 < g.height; ++r) {
    for (int c = 0; c + 1 < g.width; ++c) {
      if (g.at(c, r) != g.at(c + 1, r) || g.at(c, r) != g.at(c, r + 1)) {
        out.emplace_back(c, r);
      }
    }
  }
  return out;
}

// Max orthogonal residual (in pixels) of a total-least-squares line fit.
double line_fit_residual(const std::vector<std::pair<int, int>>& pts) {
  REQUIRE(pts.size() >= 3);
  double mx = 0.0, my = 0.0;
  for (auto [c, r] : pts) {
    mx += c;
    my += r;
  }
  mx /= pts.size();
  my /= pts.size();
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (auto [c, r] : pts) {
    sxx += (c - mx) * (c - mx);
    sxy += (c - mx) * (r - my);
    syy += (r - my) * (r - my);
  }
  // The line's normal is the eigenvector of the smallest covariance
  // eigenvalue.
  const double tr = sxx + syy;
  const double det = sxx * syy - sxy * sxy;
  const double lam2 = 0.5 * tr - std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  double nx = sxy, ny = lam2 - sxx;
  if (std::hypot(nx, ny) < 1e-9) {
    nx = lam2 - syy;
    ny = sxy;
  }
  const double norm = std::hypot(nx, ny);
  if (norm < 1e-12) return 0.0;
  nx /= norm;
  ny /= norm;
  double worst = 0.0;
  for (auto [c, r] : pts) {
    worst = std::max(worst, std::abs(nx * (c - mx) + ny * (r - my)));
  }
  return worst;
}

}  // namespace

TEST_CASE("viewport mapping") {
  const Viewport vp{-4.0, -2.0, -3.0, -1.0, 10, 20};
  CHECK(vp.x_at(0) == doctest::Approx(-3.9));
  CHECK(vp.x_at(9) == doctest::Approx(-2.1));
  CHECK(vp.y_at(0) == doctest::Approx(-1.05));
  CHECK(vp.y_at(19) == doctest::Approx(-2.95));
  CHECK(vp.contains(-3.0, -2.0));
  CHECK_FALSE(vp.contains(-1.0, -2.0));
  Viewport bad = vp;
  bad.width_px = 0;
  CHECK_THROWS_AS(bad.validate(), domain_error);
}

TEST_CASE("zero pixel radius marks only the center pixel") {
  auto fam = make_family(FamilyKind::t_exponential, 0.5);
  const Viewport vp{-2.0, -1.0, -2.0, -1.0, 10, 10};
  // Pixel (4, 5) center: x = -2 + 4.5/10 = -1.55, y = -1 - 5.5/10 = wait,
  // y_at(5) = y_max - 5.5 * 0.1 = -1.55.
  const NaturalParam center = NaturalParam::of(-1.55, -1.55);
  const RasterGrid g = render_ball(*fam, center, 0, Side::left, vp);
  int count = 0;
  for (int v : g.labels) count += v;
  CHECK(count == 1);
  CHECK(g.at(4, 5) == 1);
}

TEST_CASE("ball nesting in the pixel radius") {
  auto fam = make_family(FamilyKind::t_exponential, 0.0);
  const Viewport vp{-3.5, -0.5, -3.5, -0.5, 64, 64};
  const NaturalParam center = NaturalParam::of(-2.0, -2.0);
  const RasterGrid small = render_ball(*fam, center, 6, Side::left, vp);
  const RasterGrid big = render_ball(*fam, center, 12, Side::left, vp);
  int small_n = 0, big_n = 0;
  for (int i = 0; i < 64 * 64; ++i) {
    small_n += small.labels[i];
    big_n += big.labels[i];
    CHECK(small.labels[i] <= big.labels[i]);
  }
  CHECK(small_n > 0);
  CHECK(big_n > small_n);
}

TEST_CASE("t = 1 left ball equals a direct Itakura-Saito rasterization") {
  auto fam = make_family(FamilyKind::t_exponential, 1.0);
  const Viewport vp{-3.5, -0.5, -3.5, -0.5, 48, 48};
  const NaturalParam center = NaturalParam::of(-1.8, -2.2);
  const int radius_px = 9;
  const RasterGrid g = render_ball(*fam, center, radius_px, Side::left, vp);

  auto is_div = [&](double hx, double hy, double px, double py) {
    const double rx = hx / px, ry = hy / py;
    return rx - std::log(rx) - 1.0 + ry - std::log(ry) - 1.0;
  };
  const double r =
      is_div(center[0], center[1], center[0] + radius_px * vp.px_w(), center[1]);
  for (int row = 0; row < vp.height_px; ++row) {
    for (int col = 0; col < vp.width_px; ++col) {
      const int expected =
          is_div(center[0], center[1], vp.x_at(col), vp.y_at(row)) <= r ? 1 : 0;
      CHECK(g.at(col, row) == expected);
    }
  }
}

TEST_CASE("temper changes the ball shape at fixed pixel radius") {
  const Viewport vp{-3.5, -0.5, -3.5, -0.5, 64, 64};
  const NaturalParam center = NaturalParam::of(-1.0, -1.0);
  auto f0 = make_family(FamilyKind::t_exponential, 0.0);
  auto f1 = make_family(FamilyKind::t_exponential, 1.0);
  const RasterGrid g0 = render_ball(*f0, center, 10, Side::left, vp);
  const RasterGrid g1 = render_ball(*f1, center, 10, Side::left, vp);
  int diff = 0;
  for (int i = 0; i < 64 * 64; ++i) diff += g0.labels[i] != g1.labels[i];
  CHECK(diff >= 1);
}

TEST_CASE("center outside the viewport raises") {
  auto fam = make_family(FamilyKind::t_exponential, 0.5);
  const Viewport vp{-3.0, -1.0, -3.0, -1.0, 16, 16};
  CHECK_THROWS_AS(
      render_ball(*fam, NaturalParam::of(-0.5, -2.0), 3, Side::left, vp),
      domain_error);
}

TEST_CASE("single-site diagram is uniform; empty site list raises") {
  auto fam = make_family(FamilyKind::t_exponential, 0.5);
  const Viewport vp{-3.0, -1.0, -3.0, -1.0, 16, 16};
  const RasterGrid g =
      render_voronoi(*fam, {NaturalParam::of(-2.0, -2.0)}, Side::left, vp);
  for (int v : g.labels) CHECK(v == 1);
  CHECK_THROWS_AS(render_voronoi(*fam, {}, Side::left, vp), domain_error);
}

TEST_CASE("t = 1 right bisector matches the analytic affine bisector") {
  auto fam = make_family(FamilyKind::t_exponential, 1.0);
  const Viewport vp = Viewport::standard_domain(200, 200);
  const NaturalParam s1 = NaturalParam::of(-2.4, -1.2);
  const NaturalParam s2 = NaturalParam::of(-0.9, -2.8);
  const RasterGrid g = render_voronoi(*fam, {s1, s2}, Side::right, vp);

  // D(p || s) per axis is p/s - log(p/s) - 1, so equality of the two sums is
  // the line A x + B y + C = 0 below.
  const double A = 1.0 / s1[0] - 1.0 / s2[0];
  const double B = 1.0 / s1[1] - 1.0 / s2[1];
  const double C = std::log((s1[0] * s1[1]) / (s2[0] * s2[1]));
  REQUIRE(std::abs(B) > 1e-12);

  int checked = 0;
  for (int i = 0; i < 400 && checked < 100; ++i) {
    const double x = vp.x_min + (vp.x_max - vp.x_min) * (i + 0.5) / 400.0;
    const double y = -(A * x + C) / B;
    if (y <= vp.y_min + vp.px_h() || y >= vp.y_max - vp.px_h()) continue;
    const int col = static_cast<int>((x - vp.x_min) / vp.px_w());
    const int row = static_cast<int>((vp.y_max - y) / vp.px_h());
    // Within a 1-pixel neighborhood both cells must appear.
    bool has1 = false, has2 = false;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        const int cc = col + dc, rr = row + dr;
        if (cc < 0 || cc >= vp.width_px || rr < 0 || rr >= vp.height_px) continue;
        if (g.at(cc, rr) == 1) has1 = true;
        if (g.at(cc, rr) == 2) has2 = true;
      }
    }
    CHECK(has1);
    CHECK(has2);
    ++checked;
  }
  CHECK(checked == 100);

  // And the pixel boundary itself is straight.
  CHECK(line_fit_residual(boundary_pixels(g)) < 0.8);
}

TEST_CASE("t = 0 right diagram boundary is curved") {
  auto f0 = make_family(FamilyKind::t_exponential, 0.0);
  const Viewport vp = Viewport::standard_domain(200, 200);
  const NaturalParam s1 = NaturalParam::of(-2.4, -1.2);
  const NaturalParam s2 = NaturalParam::of(-0.9, -2.8);
  const RasterGrid g = render_voronoi(*f0, {s1, s2}, Side::right, vp);
  CHECK(line_fit_residual(boundary_pixels(g)) > 1.5);
}

TEST_CASE("left and right diagrams differ for t < 1") {
  auto fam = make_family(FamilyKind::t_exponential, 0.5);
  const Viewport vp = Viewport::standard_domain(96, 96);
  const std::vector<NaturalParam> sites = {NaturalParam::of(-2.4, -1.2),
                                           NaturalParam::of(-0.9, -2.8),
                                           NaturalParam::of(-3.0, -3.0)};
  const RasterGrid gl = render_voronoi(*fam, sites, Side::left, vp);
  const RasterGrid gr = render_voronoi(*fam, sites, Side::right, vp);
  int diff = 0;
  for (std::size_t i = 0; i < gl.labels.size(); ++i) {
    diff += gl.labels[i] != gr.labels[i];
  }
  CHECK(diff >= 1);
}

TEST_CASE("labels are stable under 3x resolution refinement") {
  // Pixel centers of a W grid coincide with centers (3c+1, 3r+1) of the 3W
  // grid; the pointwise argmin must agree there exactly.
  auto fam = make_family(FamilyKind::t_exponential, 0.5);
  const Viewport vp{-3.4, -0.6, -3.4, -0.6, 40, 40};
  Viewport fine = vp;
  fine.width_px = 120;
  fine.height_px = 120;
  const std::vector<NaturalParam> sites = {NaturalParam::of(-2.4, -1.2),
                                           NaturalParam::of(-0.9, -2.8),
                                           NaturalParam::of(-1.7, -2.0)};
  const RasterGrid coarse = render_voronoi(*fam, sites, Side::left, vp);
  const RasterGrid refined = render_voronoi(*fam, sites, Side::left, fine);
  for (int r = 0; r < 40; ++r) {
    for (int c = 0; c < 40; ++c) {
      CHECK(coarse.at(c, r) == refined.at(3 * c + 1, 3 * r + 1));
    }
  }
}

TEST_CASE("raster writing: golden bytes, sidecar, determinism, errors") {
  auto fam = make_family(FamilyKind::t_exponential, 0.5);
  const Viewport vp{-3.0, -1.0, -3.0, -1.0, 16, 16};
  const std::vector<NaturalParam> sites = {NaturalParam::of(-2.4, -1.6),
                                           NaturalParam::of(-1.3, -2.5)};
  const RasterGrid g = render_voronoi(*fam, sites, Side::left, vp);
  const RasterMeta meta{vp, sites, 0.5, Side::left};

  const auto dir = temp_dir();
  const auto out = dir / "two_site.ppm";
  write_raster(g, meta, out);

  const auto golden_dir = std::filesystem::path(TEMCLU_GOLDEN_DIR);
  const auto golden = golden_dir / "voronoi_two_site_16.ppm";
  if (std::getenv("TEMCLU_WRITE_GOLDEN")) {
    std::filesystem::create_directories(golden_dir);
    std::filesystem::copy_file(out, golden,
                               std::filesystem::copy_options::overwrite_existing);
    std::filesystem::copy_file(
        dir / "two_site.ppm.json",
        golden_dir / "voronoi_two_site_16.ppm.json",
        std::filesystem::copy_options::overwrite_existing);
  }
  REQUIRE(std::filesystem::exists(golden));
  CHECK(slurp(out) == slurp(golden));
  CHECK(slurp(dir / "two_site.ppm.json") ==
        slurp(golden_dir / "voronoi_two_site_16.ppm.json"));

  // Re-rendering and rewriting is byte-identical.
  const auto out2 = dir / "two_site_rerun.ppm";
  write_raster(render_voronoi(*fam, sites, Side::left, vp), meta, out2);
  CHECK(slurp(out) == slurp(out2));

  // PPM header and palette basics.
  const std::string bytes = slurp(out);
  CHECK(bytes.rfind("P6\n16 16\n255\n", 0) == 0);
  CHECK(bytes.size() == 13 + 16 * 16 * 3);

  // Sidecar round trip.
  const nlohmann::json side =
      nlohmann::json::parse(slurp(dir / "two_site.ppm.json"));
  CHECK(side["t"] == doctest::Approx(0.5));
  CHECK(side["side"] == "left");
  CHECK(side["viewport"]["width_px"] == 16);
  CHECK(side["sites"].size() == 2);
  CHECK(side["palette"].size() == 12);
  CHECK(side["palette"][0][0] == kPalette[0][0]);

  CHECK_THROWS_AS(
      write_raster(g, meta, dir / "no_such_subdir" / "x.ppm"), io_error);
}
