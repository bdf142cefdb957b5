#include "cwmi/physics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cwmi {

namespace {

constexpr double kPi = 3.14159265358979323846;

double deg2rad(double d) { return d * kPi / 180.0; }

bool finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

struct SurfaceFrame {
  Vec2 normal;   // unit, away from the surface
  Vec2 tangent;  // unit, 90 degrees clockwise from normal
};

// One-body contact response against a static surface. Fast impacts bounce
// with restitution; slow or dead impacts absorb the normal component so a
// resting disc stays put instead of micro-bouncing. Friction is a tangential
// impulse clamped by mu times the normal impulse, and never reverses the
// tangential velocity.
void surface_contact(BodyState& b, const SurfaceFrame& f, double mu, double e, Support surf) {
  const double vn = b.velocity.dot(f.normal);
  if (vn > 1e-12) {
    b.support = Support::None;  // separating
    return;
  }
  const double vt = b.velocity.dot(f.tangent);
  if (vn < -kBounceMinSpeed && e > 0.0) {
    const double jn = -(1.0 + e) * vn;
    b.velocity += f.normal * jn;
    const double cap = mu * jn;
    const double dvt = std::clamp(-vt, -cap, cap);
    b.velocity += f.tangent * dvt;
    b.support = Support::None;
    return;
  }
  if (vn < 0.0) {
    const double removed = -vn;
    b.velocity -= f.normal * vn;  // kill the approach exactly
    const double cap = mu * removed;
    const double dvt = std::clamp(-vt, -cap, cap);
    b.velocity += f.tangent * dvt;
  }
  b.support = surf;
}

void disc_pair_contact(const Scene& scene, WorldState& w, std::size_t i, std::size_t j) {
  const ObjectSpec& oi = scene.objects[i];
  const ObjectSpec& oj = scene.objects[j];
  BodyState& bi = w.bodies[i];
  BodyState& bj = w.bodies[j];

  const Vec2 d = bj.position - bi.position;
  const double dist = d.norm();
  if (dist >= oi.radius + oj.radius || dist < 1e-12) return;

  const Vec2 n{d.x / dist, d.y / dist};
  const double rel_n = (bj.velocity - bi.velocity).dot(n);
  if (rel_n >= 0.0) return;  // already separating

  const double inv_m = 1.0 / oi.mass + 1.0 / oj.mass;
  const double e = oi.restitution_e * oj.restitution_e;
  const double jn = -(1.0 + e) * rel_n / inv_m;
  bi.velocity -= n * (jn / oi.mass);
  bj.velocity += n * (jn / oj.mass);

  const Vec2 t{-n.y, n.x};
  const double rel_t = (bj.velocity - bi.velocity).dot(t);
  const double mu = std::sqrt(oi.friction_mu * oj.friction_mu);
  const double jt_stick = -rel_t / inv_m;
  const double jt = std::clamp(jt_stick, -mu * jn, mu * jn);
  bi.velocity -= t * (jt / oi.mass);
  bj.velocity += t * (jt / oj.mass);
}

// Resolves one body against the static environment (incline first where it
// applies, then the ground plane). Handles the incline-to-ground handoff by
// rotating the velocity onto the horizontal, preserving the speed held before
// this step's gravity kick: the rotated body no longer descends during the
// step, so crediting the kick's work would create energy out of nothing.
void environment_contact(const Scene& scene, BodyState& b, const ObjectSpec& o, double dt) {
  const Environment& env = scene.env;

  if (env.ramp) {
    const RampSpec& ramp = *env.ramp;
    const double theta = deg2rad(ramp.angle_deg);
    const Vec2 up_slope{-std::cos(theta), std::sin(theta)};
    const Vec2 normal{std::sin(theta), std::cos(theta)};
    const Vec2 rel{b.position.x - ramp.foot_x, b.position.y - env.ground_y};
    const double s = rel.dot(up_slope);
    const double d = rel.dot(normal);
    const double s_low = ramp_junction_s(theta, o.radius);

    if (d >= 0.0 && d <= o.radius + kContactEps && s >= s_low && s <= ramp.length + kContactEps) {
      surface_contact(b, {normal, {normal.y, -normal.x}}, o.friction_mu, o.restitution_e,
                      Support::Incline);
      return;
    }
    if (b.support == Support::Incline && s < s_low) {
      // Passed the foot of the incline: continue on the ground at the speed
      // from the start of the step (undo the gravity kick before rotating).
      const Vec2 pre{b.velocity.x, b.velocity.y + env.gravity * dt};
      b.velocity = {std::copysign(pre.norm(), b.velocity.x), 0.0};
      b.support = Support::Ground;
    }
  }

  const double gap = b.position.y - (env.ground_y + o.radius);
  if (gap <= kContactEps) {
    surface_contact(b, {{0.0, 1.0}, {1.0, 0.0}}, o.friction_mu, o.restitution_e,
                    Support::Ground);
    return;
  }
  if (b.support != Support::Incline) b.support = Support::None;
}

}  // namespace

double Vec2::norm() const { return std::sqrt(x * x + y * y); }

const char* template_name(TemplateId t) {
  switch (t) {
    case TemplateId::Drop: return "DROP";
    case TemplateId::Ramp: return "RAMP";
    case TemplateId::Collide1d: return "COLLIDE1D";
    case TemplateId::Projectile: return "PROJECTILE";
  }
  return "UNKNOWN";
}

TemplateId template_from_name(const std::string& name) {
  if (name == "DROP") return TemplateId::Drop;
  if (name == "RAMP") return TemplateId::Ramp;
  if (name == "COLLIDE1D") return TemplateId::Collide1d;
  if (name == "PROJECTILE") return TemplateId::Projectile;
  throw ConsistencyError("unknown template name: " + name);
}

double ramp_junction_s(double theta_rad, double radius) {
  return radius * std::tan(theta_rad / 2.0);
}

Vec2 ramp_surface_point(const RampSpec& ramp, double ground_y, double s, double radius) {
  const double theta = deg2rad(ramp.angle_deg);
  const Vec2 up_slope{-std::cos(theta), std::sin(theta)};
  const Vec2 normal{std::sin(theta), std::cos(theta)};
  return Vec2{ramp.foot_x, ground_y} + up_slope * s + normal * radius;
}

WorldState initial_state(const Scene& scene) {
  WorldState w;
  w.bodies.reserve(scene.objects.size());
  for (const ObjectSpec& o : scene.objects) {
    w.bodies.push_back(BodyState{o.position, o.velocity, Support::None});
  }
  return w;
}

WorldState step(const Scene& scene, const WorldState& state, double dt, long step_index) {
  WorldState w = state;
  const std::size_t n = w.bodies.size();

  for (BodyState& b : w.bodies) b.velocity.y -= scene.env.gravity * dt;

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      disc_pair_contact(scene, w, i, j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    environment_contact(scene, w.bodies[i], scene.objects[i], dt);
  }
  for (BodyState& b : w.bodies) b.position += b.velocity * dt;

  for (std::size_t i = 0; i < n; ++i) {
    if (!finite(w.bodies[i].position) || !finite(w.bodies[i].velocity)) {
      throw SimulationDivergedError(step_index,
                                    "non-finite state on body " + std::to_string(i));
    }
  }
  return w;
}

SimulationResult simulate(const Scene& scene) {
  const Environment& env = scene.env;
  const long n_steps = std::lround(env.horizon / env.dt);

  WorldState w = initial_state(scene);
  Trajectory traj;
  traj.dt = env.dt;
  traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);

  auto record = [&traj](const WorldState& ws) {
    std::vector<BodySample> row;
    row.reserve(ws.bodies.size());
    for (const BodyState& b : ws.bodies) row.push_back({b.position, b.velocity});
    traj.states.push_back(std::move(row));
  };
  record(w);

  int slow_streak = 0;
  for (long k = 0; k < n_steps; ++k) {
    w = step(scene, w, env.dt, k);
    record(w);
    bool all_slow = true;
    for (const BodyState& b : w.bodies) {
      if (b.velocity.norm() >= kRestSpeed) {
        all_slow = false;
        break;
      }
    }
    slow_streak = all_slow ? slow_streak + 1 : 0;
    if (slow_streak >= kRestSteps) {
      traj.settled = true;
      break;
    }
  }
  return {std::move(traj), std::move(w)};
}

// ---------------------------------------------------------------------------
// Closed-form outcomes.

double drop_fall_time(double height, double gravity) {
  if (height <= 0.0 || gravity <= 0.0) {
    throw UnsupportedRegimeError("drop_fall_time requires height > 0 and gravity > 0");
  }
  return std::sqrt(2.0 * height / gravity);
}

RampOutcome ramp_outcome(double theta_rad, double slide_length, double mu, double gravity) {
  if (theta_rad <= 0.0 || theta_rad >= deg2rad(60.0)) {
    throw UnsupportedRegimeError("ramp angle outside (0, 60) degrees");
  }
  if (slide_length < 0.0 || mu < 0.0 || gravity <= 0.0) {
    throw UnsupportedRegimeError("ramp_outcome parameters out of range");
  }
  const double a = gravity * (std::sin(theta_rad) - mu * std::cos(theta_rad));
  if (a <= 0.0) return {0.0, 0.0};  // friction stalls the disc
  const double exit_speed = std::sqrt(2.0 * a * slide_length);
  if (mu == 0.0) return {exit_speed, std::numeric_limits<double>::infinity()};
  return {exit_speed, exit_speed * exit_speed / (2.0 * mu * gravity)};
}

CollideOutcome collide1d_outcome(double m1, double m2, double e, double v1, double v2) {
  if (m1 <= 0.0 || m2 <= 0.0) throw UnsupportedRegimeError("collide1d: masses must be positive");
  if (e < 0.0 || e > 1.0) throw UnsupportedRegimeError("collide1d: restitution outside [0,1]");
  if (v1 <= v2) throw UnsupportedRegimeError("collide1d: bodies are not approaching");
  const double msum = m1 + m2;
  const double v1p = (m1 * v1 + m2 * v2 - m2 * e * (v1 - v2)) / msum;
  const double v2p = (m1 * v1 + m2 * v2 + m1 * e * (v1 - v2)) / msum;
  return {v1p, v2p};
}

double projectile_range(double speed, double angle_rad, double gravity) {
  if (speed < 0.0 || gravity <= 0.0 || angle_rad <= 0.0 || angle_rad >= kPi / 2.0) {
    throw UnsupportedRegimeError("projectile_range parameters out of range");
  }
  return speed * speed * std::sin(2.0 * angle_rad) / gravity;
}

// ---------------------------------------------------------------------------
// Canonical scene builders.

Scene make_drop_scene(double height, double radius, double mass, double mu, double e,
                      double x0, double gravity) {
  Scene s;
  s.template_id = TemplateId::Drop;
  s.env.gravity = gravity;
  s.env.horizon = 2.0;
  ObjectSpec o;
  o.id = 0;
  o.radius = radius;
  o.mass = mass;
  o.friction_mu = mu;
  o.restitution_e = e;
  o.position = {x0, s.env.ground_y + radius + height};
  o.velocity = {0.0, 0.0};
  s.objects.push_back(o);
  return s;
}

Scene make_ramp_scene(double angle_deg, double slide_length, double mu, double radius,
                      double mass, double foot_x, double gravity) {
  Scene s;
  s.template_id = TemplateId::Ramp;
  s.env.gravity = gravity;
  s.env.horizon = 8.0;
  const double theta = deg2rad(angle_deg);
  const double s_low = ramp_junction_s(theta, radius);
  RampSpec ramp;
  ramp.angle_deg = angle_deg;
  ramp.foot_x = foot_x;
  ramp.length = slide_length + s_low + radius;  // headroom past the start contact
  s.env.ramp = ramp;

  ObjectSpec o;
  o.id = 0;
  o.radius = radius;
  o.mass = mass;
  o.friction_mu = mu;
  o.restitution_e = 0.0;
  o.position = ramp_surface_point(ramp, s.env.ground_y, slide_length + s_low, radius);
  o.velocity = {0.0, 0.0};
  s.objects.push_back(o);
  return s;
}

Scene make_collide_scene(double m1, double m2, double e1, double e2, double v1, double v2,
                         double radius, double x1, double x2, double gravity) {
  Scene s;
  s.template_id = TemplateId::Collide1d;
  s.env.gravity = gravity;
  s.env.horizon = 3.0;
  const double y = s.env.ground_y + radius;
  ObjectSpec a;
  a.id = 0;
  a.radius = radius;
  a.mass = m1;
  a.friction_mu = 0.0;
  a.restitution_e = e1;
  a.position = {x1, y};
  a.velocity = {v1, 0.0};
  ObjectSpec b;
  b.id = 1;
  b.radius = radius;
  b.mass = m2;
  b.friction_mu = 0.0;
  b.restitution_e = e2;
  b.position = {x2, y};
  b.velocity = {v2, 0.0};
  s.objects.push_back(a);
  s.objects.push_back(b);
  return s;
}

Scene make_projectile_scene(double speed, double angle_deg, double radius, double mass,
                            double mu, double e, double x0, double gravity) {
  Scene s;
  s.template_id = TemplateId::Projectile;
  s.env.gravity = gravity;
  s.env.horizon = 5.0;
  const double phi = deg2rad(angle_deg);
  ObjectSpec o;
  o.id = 0;
  o.radius = radius;
  o.mass = mass;
  o.friction_mu = mu;
  o.restitution_e = e;
  o.position = {x0, s.env.ground_y + radius};
  o.velocity = {speed * std::cos(phi), speed * std::sin(phi)};
  s.objects.push_back(o);
  return s;
}

bool validate_scene(const Scene& scene) {
  const Environment& env = scene.env;
  if (!(env.gravity > 0.0) || !(env.dt > 0.0) || !(env.horizon > 0.0)) return false;
  if (scene.objects.empty() || scene.objects.size() > static_cast<std::size_t>(kNumSlots)) {
    return false;
  }
  if (env.ramp) {
    if (!(env.ramp->angle_deg > 0.0) || !(env.ramp->angle_deg < 60.0)) return false;
    if (!(env.ramp->length > 0.0)) return false;
  }
  for (const ObjectSpec& o : scene.objects) {
    if (!(o.radius > 0.0) || !(o.mass > 0.0)) return false;
    if (o.friction_mu < 0.0 || o.restitution_e < 0.0 || o.restitution_e > 1.0) return false;
    if (o.position.y < env.ground_y + o.radius - 1e-9) return false;
    if (env.ramp) {
      const double theta = deg2rad(env.ramp->angle_deg);
      const Vec2 up_slope{-std::cos(theta), std::sin(theta)};
      const Vec2 normal{std::sin(theta), std::cos(theta)};
      const Vec2 rel{o.position.x - env.ramp->foot_x, o.position.y - env.ground_y};
      const double s = rel.dot(up_slope);
      const double d = rel.dot(normal);
      if (s >= -o.radius && s <= env.ramp->length + o.radius && d < o.radius - 1e-9) {
        return false;
      }
    }
  }
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
      const double dist = (scene.objects[j].position - scene.objects[i].position).norm();
      if (dist < scene.objects[i].radius + scene.objects[j].radius - 1e-9) return false;
    }
  }
  return true;
}

StateVector encode_final_state(const Scene& scene, const WorldState& state,
                               const NormalizationTable& norms) {
  if (scene.objects.size() > static_cast<std::size_t>(kNumSlots)) {
    throw CapacityError("scene has " + std::to_string(scene.objects.size()) + " objects; " +
                        std::to_string(kNumSlots) + " slots available");
  }
  if (scene.objects.size() != state.bodies.size()) {
    throw ConsistencyError("scene/state object count mismatch");
  }
  StateVector out{};
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const ObjectSpec& o = scene.objects[i];
    if (o.id < 0 || o.id >= kNumSlots) {
      throw CapacityError("object id " + std::to_string(o.id) + " outside slot range");
    }
    const BodyState& b = state.bodies[i];
    double* slot = out.data() + o.id * kSlotProps;
    if (slot[0] != 0.0) throw ConsistencyError("duplicate object id " + std::to_string(o.id));
    slot[0] = 1.0;
    slot[1] = b.position.x / norms.sigma_x;
    slot[2] = b.position.y / norms.sigma_y;
    slot[3] = b.velocity.x / norms.sigma_v;
    slot[4] = b.velocity.y / norms.sigma_v;
    slot[5] = o.mass / norms.sigma_m;
    slot[6] = o.radius / norms.sigma_r;
    slot[7] = o.friction_mu;
    slot[8] = o.restitution_e;
    slot[9] = static_cast<double>(o.nuisance_tag);
  }
  return out;
}

}  // namespace cwmi
