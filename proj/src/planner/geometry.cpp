#include "surfer/planner/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "surfer/sim/simulator.hpp"

namespace surfer::planner {

double distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

Point3 lerp(const Point3& a, const Point3& b, double t) {
  return {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, a.z + (b.z - a.z) * t};
}

Point3 position_of(const sim::RobotState& r) { return {r.x, r.y, r.z}; }

bool point_in_obstacle(const Point3& p, const Obstacle& o, double margin) {
  if (p.z < o.z_min - margin || p.z > o.z_max + margin) return false;
  const double r = o.half_extent + margin;
  if (o.shape == Obstacle::Shape::Cylinder) return std::hypot(p.x - o.x, p.y - o.y) <= r;
  return std::abs(p.x - o.x) <= r && std::abs(p.y - o.y) <= r;
}

bool point_free(const Point3& p, const std::vector<Obstacle>& obstacles, double margin) {
  return std::none_of(obstacles.begin(), obstacles.end(), [&](const Obstacle& o) { return point_in_obstacle(p, o, margin); });
}

namespace {

// Parameter interval [lo, hi] within [0, 1] where lo <= a + t*d <= hi holds.
bool clip_slab(double a, double d, double lo, double hi, double& t0, double& t1) {
  if (d == 0.0) return a >= lo && a <= hi;
  double ta = (lo - a) / d, tb = (hi - a) / d;
  if (ta > tb) std::swap(ta, tb);
  t0 = std::max(t0, ta);
  t1 = std::min(t1, tb);
  return t0 <= t1;
}

bool segment_hits(const Point3& a, const Point3& b, const Obstacle& o, double margin) {
  double t0 = 0.0, t1 = 1.0;
  const double dx = b.x - a.x, dy = b.y - a.y, dz = b.z - a.z;
  if (!clip_slab(a.z, dz, o.z_min - margin, o.z_max + margin, t0, t1)) return false;
  const double r = o.half_extent + margin;
  if (o.shape == Obstacle::Shape::Box) {
    return clip_slab(a.x, dx, o.x - r, o.x + r, t0, t1) && clip_slab(a.y, dy, o.y - r, o.y + r, t0, t1);
  }
  // Planar circle: |(a - c) + t d|^2 <= r^2.
  const double fx = a.x - o.x, fy = a.y - o.y;
  const double qa = dx * dx + dy * dy;
  const double qb = 2.0 * (fx * dx + fy * dy);
  const double qc = fx * fx + fy * fy - r * r;
  if (qa == 0.0) return qc <= 0.0;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) return false;
  const double s = std::sqrt(disc);
  const double c0 = (-qb - s) / (2.0 * qa), c1 = (-qb + s) / (2.0 * qa);
  return std::max(t0, c0) <= std::min(t1, c1);
}

}  // namespace

bool segment_free(const Point3& a, const Point3& b, const std::vector<Obstacle>& obstacles, double margin) {
  return std::none_of(obstacles.begin(), obstacles.end(), [&](const Obstacle& o) { return segment_hits(a, b, o, margin); });
}

bool in_workspace(const Point3& p) {
  return p.x >= sim::kWorkXMin && p.x <= sim::kWorkXMax && p.y >= sim::kWorkYMin && p.y <= sim::kWorkYMax &&
         p.z >= 0.0 && p.z <= sim::kWorkZMax;
}

std::vector<Obstacle> scene_obstacles(const sim::World& world, const sim::SceneState& scene,
                                      const std::vector<std::size_t>& skip, const CarriedLoad* load) {
  std::vector<Obstacle> out;
  const double grow = load ? load->radius : sim::kEffectorRadius;
  const double below = load ? load->height : 0.0;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (std::find(skip.begin(), skip.end(), i) != skip.end()) continue;
    if (scene.attached && *scene.attached == i) continue;
    const auto& spec = world.spec(scene.objects[i]);
    const auto& st = scene.objects[i].state;
    Obstacle o;
    o.shape = spec.articulated ? Obstacle::Shape::Box : Obstacle::Shape::Cylinder;
    o.x = st.x;
    o.y = st.y;
    o.half_extent = (st.upright ? spec.footprint_radius : 0.5 * spec.height) + grow;
    o.z_min = st.z;
    o.z_max = st.z + sim::collision_height(spec, st) + below;
    out.push_back(o);
  }
  return out;
}

}  // namespace surfer::planner
