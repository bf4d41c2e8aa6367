#include "surfer/sim/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>

#include "surfer/common/errors.hpp"
#include "surfer/sim/simulator.hpp"

namespace surfer::sim {

namespace {

constexpr double kExtent = 64.0;
constexpr double kPixel = kExtent / static_cast<double>(Image::kSize);
constexpr double kTopXMin = -32.0, kTopYMax = 68.0;
constexpr double kFrontZMax = 56.0;
constexpr double kTableThickness = 4.0;
const Rgb kFloor{40.0 / 255.0, 40.0 / 255.0, 40.0 / 255.0};
const Rgb kHandle{0.9, 0.9, 0.9};

Rgb darker(const Rgb& c) { return {0.6 * c.r, 0.6 * c.g, 0.6 * c.b}; }

class Canvas {
 public:
  explicit Canvas(Image& img) : img_(img) {}

  void fill(const Rgb& c) {
    for (std::size_t r = 0; r < Image::kSize; ++r)
      for (std::size_t col = 0; col < Image::kSize; ++col) set(r, col, c);
  }
  void set(std::size_t r, std::size_t col, const Rgb& c) {
    img_.at(r, col, 0) = c.r;
    img_.at(r, col, 1) = c.g;
    img_.at(r, col, 2) = c.b;
  }
  // Paints every pixel whose center (u, v) in world units satisfies inside().
  // Only pixels overlapping the box [u_lo, u_hi] x [v_lo, v_hi] are tested.
  template <typename Pred>
  void paint(double u_min, double v_max, const Rgb& c, double u_lo, double u_hi, double v_lo, double v_hi,
             Pred inside) {
    const long n = static_cast<long>(Image::kSize);
    const long c0 = std::max(0L, static_cast<long>(std::floor((u_lo - u_min) / kPixel)) - 1);
    const long c1 = std::min(n - 1, static_cast<long>(std::floor((u_hi - u_min) / kPixel)) + 1);
    const long r0 = std::max(0L, static_cast<long>(std::floor((v_max - v_hi) / kPixel)) - 1);
    const long r1 = std::min(n - 1, static_cast<long>(std::floor((v_max - v_lo) / kPixel)) + 1);
    for (long r = r0; r <= r1; ++r) {
      const double v = v_max - (static_cast<double>(r) + 0.5) * kPixel;
      for (long col = c0; col <= c1; ++col) {
        const double u = u_min + (static_cast<double>(col) + 0.5) * kPixel;
        if (inside(u, v)) set(static_cast<std::size_t>(r), static_cast<std::size_t>(col), c);
      }
    }
  }
  template <typename ColorFn>
  void shade(double u_min, double v_max, ColorFn color) {
    for (std::size_t r = 0; r < Image::kSize; ++r) {
      const double v = v_max - (static_cast<double>(r) + 0.5) * kPixel;
      for (std::size_t col = 0; col < Image::kSize; ++col) {
        const double u = u_min + (static_cast<double>(col) + 0.5) * kPixel;
        if (auto c = color(u, v)) set(r, col, *c);
      }
    }
  }
  // Plus-shaped marker centred on the pixel containing (u, v).
  void marker(double u_min, double v_max, double u, double v, const Rgb& c) {
    const long col = static_cast<long>(std::floor((u - u_min) / kPixel));
    const long row = static_cast<long>(std::floor((v_max - v) / kPixel));
    for (long d = -2; d <= 2; ++d) {
      plot(row + d, col, c);
      if (d != 0) plot(row, col + d, c);
    }
  }

 private:
  void plot(long r, long c, const Rgb& color) {
    const long n = static_cast<long>(Image::kSize);
    if (r >= 0 && r < n && c >= 0 && c < n) set(static_cast<std::size_t>(r), static_cast<std::size_t>(c), color);
  }
  Image& img_;
};

bool stripe_at(const TableSpec& t, double u, double v) {
  double coord = 0.0;
  switch (t.orientation) {
    case StripeOrientation::Horizontal: coord = v; break;
    case StripeOrientation::Vertical: coord = u; break;
    case StripeOrientation::Diagonal: coord = (u + v) / std::sqrt(2.0); break;
  }
  const long band = static_cast<long>(std::floor(coord / (0.5 * t.stripe_period)));
  return ((band % 2) + 2) % 2 == 1;
}

Rgb effector_color(const RobotState& r) {
  return {1.0, 0.2 + 0.8 * r.gripper, 0.2 + 0.8 * std::min(r.z / 40.0, 1.0)};
}

double dist_to_segment(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

void render_top(const World& world, const SceneState& state, Canvas& cv) {
  const TableSpec& table = world.tables[state.table_id];
  cv.fill(kFloor);
  cv.shade(kTopXMin, kTopYMax, [&](double x, double y) -> std::optional<Rgb> {
    if (x < kTable.x_min || x > kTable.x_max || y < kTable.y_min || y > kTable.y_max) return std::nullopt;
    return stripe_at(table, x, y) ? table.stripe : table.color;
  });

  std::vector<std::size_t> order(state.objects.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return state.objects[a].state.z < state.objects[b].state.z; });

  for (std::size_t i : order) {
    const ObjectSpec& spec = world.spec(state.objects[i]);
    const ObjectState& o = state.objects[i].state;
    const double r = spec.footprint_radius;
    if (spec.articulated) {
      cv.paint(kTopXMin, kTopYMax, spec.color, o.x - r, o.x + r, o.y - r, o.y + r,
               [&](double x, double y) { return std::abs(x - o.x) <= r && std::abs(y - o.y) <= r; });
      const DoorGeometry g = door_geometry(spec, o);
      const double theta = o.hinge_deg * std::numbers::pi / 180.0;
      const double ex = g.hinge_x + g.length * std::cos(theta);
      const double ey = g.hinge_y - g.length * std::sin(theta);
      cv.paint(kTopXMin, kTopYMax, darker(spec.color), std::min(g.hinge_x, ex) - 0.8, std::max(g.hinge_x, ex) + 0.8,
               std::min(g.hinge_y, ey) - 0.8, std::max(g.hinge_y, ey) + 0.8,
               [&](double x, double y) { return dist_to_segment(x, y, g.hinge_x, g.hinge_y, ex, ey) <= 0.8; });
      cv.paint(kTopXMin, kTopYMax, kHandle, g.handle_x - 1.2, g.handle_x + 1.2, g.handle_y - 1.2, g.handle_y + 1.2,
               [&](double x, double y) { return std::hypot(x - g.handle_x, y - g.handle_y) <= 1.2; });
    } else if (o.upright) {
      cv.paint(kTopXMin, kTopYMax, spec.color, o.x - r, o.x + r, o.y - r, o.y + r,
               [&](double x, double y) { return std::hypot(x - o.x, y - o.y) <= r; });
    } else {
      const double c = std::cos(o.yaw), s = std::sin(o.yaw);
      const double reach = std::hypot(0.5 * spec.height, r);
      cv.paint(kTopXMin, kTopYMax, spec.color, o.x - reach, o.x + reach, o.y - reach, o.y + reach,
               [&](double x, double y) {
        const double along = (x - o.x) * c + (y - o.y) * s;
        const double across = -(x - o.x) * s + (y - o.y) * c;
        return std::abs(along) <= 0.5 * spec.height && std::abs(across) <= r;
      });
    }
  }
  cv.marker(kTopXMin, kTopYMax, state.robot.x, state.robot.y, effector_color(state.robot));
}

void render_front(const World& world, const SceneState& state, Canvas& cv) {
  const TableSpec& table = world.tables[state.table_id];
  cv.fill(kFloor);
  cv.shade(kTopXMin, kFrontZMax, [&](double x, double z) -> std::optional<Rgb> {
    if (x < kTable.x_min || x > kTable.x_max || z > 0.0 || z < -kTableThickness) return std::nullopt;
    return stripe_at(table, x, z) ? table.stripe : table.color;
  });

  // Far objects first so nearer ones occlude them.
  std::vector<std::size_t> order(state.objects.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return state.objects[a].state.y > state.objects[b].state.y; });

  for (std::size_t i : order) {
    const ObjectSpec& spec = world.spec(state.objects[i]);
    const ObjectState& o = state.objects[i].state;
    const double half_w = o.upright ? spec.footprint_radius : 0.5 * spec.height;
    const double h = collision_height(spec, o);
    cv.paint(kTopXMin, kFrontZMax, spec.color, o.x - half_w, o.x + half_w, o.z, o.z + h, [&](double x, double z) {
      return std::abs(x - o.x) <= half_w && z >= o.z && z <= o.z + h;
    });
    if (spec.articulated) {
      const DoorGeometry g = door_geometry(spec, o);
      const double theta = o.hinge_deg * std::numbers::pi / 180.0;
      const double ex = g.hinge_x + g.length * std::cos(theta);
      const double lo = std::min(g.hinge_x, ex), hi = std::max(g.hinge_x, ex) + 0.6;
      cv.paint(kTopXMin, kFrontZMax, darker(spec.color), lo, hi, 0.0, spec.height,
               [&](double x, double z) { return x >= lo && x <= hi && z >= 0.0 && z <= spec.height; });
      cv.paint(kTopXMin, kFrontZMax, kHandle, g.handle_x - 1.2, g.handle_x + 1.2, g.handle_z - 1.2, g.handle_z + 1.2,
               [&](double x, double z) { return std::hypot(x - g.handle_x, z - g.handle_z) <= 1.2; });
    }
  }
  cv.marker(kTopXMin, kFrontZMax, state.robot.x, state.robot.z, effector_color(state.robot));
}

}  // namespace

Image render(const World& world, const SceneState& state, View view, const RenderConfig& cfg) {
  if (!(cfg.brightness >= 0.25 && cfg.brightness <= 2.0)) {
    throw ConfigError("render brightness must lie in [0.25, 2.0], got " + std::to_string(cfg.brightness));
  }
  Image img;
  Canvas cv(img);
  if (view == View::Top) render_top(world, state, cv);
  else render_front(world, state, cv);
  if (cfg.brightness != 1.0) {
    for (double& v : img.pixels) v = std::clamp(v * cfg.brightness, 0.0, 1.0);
  }
  return img;
}

std::string to_ppm(const Image& image) {
  std::string out = "P6\n56 56\n255\n";
  out.reserve(out.size() + image.pixels.size());
  for (double v : image.pixels) out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  return out;
}

Image from_ppm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w != Image::kSize || h != Image::kSize || maxval != 255) throw ConfigError("unsupported PPM header");
  in.get();
  Image img;
  for (double& v : img.pixels) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw ConfigError("truncated PPM payload");
    v = static_cast<double>(c) / 255.0;
  }
  return img;
}

}  // namespace surfer::sim
