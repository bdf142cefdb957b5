#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "cwmi/errors.hpp"

namespace cwmi {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const;
};

enum class TemplateId : int { Drop = 0, Ramp = 1, Collide1d = 2, Projectile = 3 };

const char* template_name(TemplateId t);
TemplateId template_from_name(const std::string& name);

/// Static straight incline. The surface runs from the foot at
/// (foot_x, ground_y) up and to the left at `angle_deg` above horizontal,
/// for `length` metres measured along the slope.
struct RampSpec {
  double angle_deg = 30.0;
  double length = 3.0;
  double foot_x = 0.0;
};

struct Environment {
  double gravity = 9.81;       // m/s^2, downward
  double ground_y = 0.0;       // height of the flat ground plane
  double dt = 1.0 / 240.0;     // integration step, seconds
  double horizon = 5.0;        // simulated duration, seconds
  std::optional<RampSpec> ramp;
};

/// A rigid disc. `nuisance_tag` is a binary label carried through the
/// pipeline; it never enters the dynamics.
struct ObjectSpec {
  int id = 0;
  double radius = 0.2;
  double mass = 1.0;
  Vec2 position;
  Vec2 velocity;
  double friction_mu = 0.5;
  double restitution_e = 0.5;
  int nuisance_tag = 0;
};

struct Scene {
  TemplateId template_id = TemplateId::Drop;
  Environment env;
  std::vector<ObjectSpec> objects;
};

enum class Support : std::uint8_t { None = 0, Ground = 1, Incline = 2 };

struct BodyState {
  Vec2 position;
  Vec2 velocity;
  Support support = Support::None;
};

struct WorldState {
  std::vector<BodyState> bodies;
};

struct BodySample {
  Vec2 position;
  Vec2 velocity;
};

/// Dense record of a rollout: `states[t][i]` is body i after t steps
/// (index 0 is the initial state). `settled` is set when every body
/// stayed below the rest-speed threshold long enough to stop early.
struct Trajectory {
  std::vector<std::vector<BodySample>> states;
  double dt = 0.0;
  bool settled = false;
};

struct SimulationResult {
  Trajectory trajectory;
  WorldState final_state;
};

// Contact model constants.
inline constexpr double kContactEps = 1e-9;     // surface touch tolerance, metres
inline constexpr double kBounceMinSpeed = 0.12; // below this, impacts absorb instead of bounce
inline constexpr double kRestSpeed = 1e-3;      // per-body speed threshold for settling
inline constexpr int kRestSteps = 24;           // consecutive slow steps before early stop

/// Initial body states implied by the scene's object specs.
WorldState initial_state(const Scene& scene);

/// Advances the world by one step of semi-implicit Euler with impulse
/// contacts. Pure: equal inputs give bit-identical outputs. Throws
/// SimulationDivergedError (with `step_index`) if any value goes non-finite.
WorldState step(const Scene& scene, const WorldState& state, double dt, long step_index = 0);

/// Rolls the scene forward for env.horizon seconds (or until everything
/// settles) and records every step.
SimulationResult simulate(const Scene& scene);

// ---------------------------------------------------------------------------
// Closed-form outcomes for the four scenario templates. These are written
// directly from textbook kinematics, independent of the stepper, so the two
// can be checked against each other.

/// Free-fall time from rest through `height` metres: sqrt(2h/g).
double drop_fall_time(double height, double gravity);

struct RampOutcome {
  double exit_speed;      // speed at the foot of the incline
  double slide_distance;  // distance travelled on flat ground before stopping
};

/// Disc released from rest `slide_length` metres up a `theta_rad` incline
/// with Coulomb friction `mu`. If friction meets or exceeds the driving
/// component the disc never moves and both outputs are zero. On frictionless
/// ground (mu == 0) the slide distance is infinite.
RampOutcome ramp_outcome(double theta_rad, double slide_length, double mu, double gravity);

struct CollideOutcome {
  double v1_post;
  double v2_post;
};

/// 1-D two-body collision with restitution `e`; bodies must be approaching
/// (v1 > v2).
CollideOutcome collide1d_outcome(double m1, double m2, double e, double v1, double v2);

/// Horizontal range of a projectile launched from ground level: v^2 sin(2a)/g.
double projectile_range(double speed, double angle_rad, double gravity);

// ---------------------------------------------------------------------------
// Canonical scene builders used by the generator, the tests, and the
// oracle-agreement checks. Geometry conventions (ramp placement, launch
// height) live here so every consumer gets the same scene.

Scene make_drop_scene(double height, double radius, double mass, double mu, double e,
                      double x0 = 0.0, double gravity = 9.81);
Scene make_ramp_scene(double angle_deg, double slide_length, double mu, double radius,
                      double mass, double foot_x = 0.0, double gravity = 9.81);
Scene make_collide_scene(double m1, double m2, double e1, double e2, double v1, double v2,
                         double radius = 0.25, double x1 = -2.0, double x2 = 2.0,
                         double gravity = 9.81);
Scene make_projectile_scene(double speed, double angle_deg, double radius, double mass,
                            double mu, double e, double x0 = 0.0, double gravity = 9.81);

/// Slope coordinate below which a disc of radius r transitions from incline
/// support to ground support: r * tan(theta/2).
double ramp_junction_s(double theta_rad, double radius);

/// Body placement for a disc resting on the incline with contact point at
/// slope coordinate s (measured up-slope from the foot).
Vec2 ramp_surface_point(const RampSpec& ramp, double ground_y, double s, double radius);

/// Checks pairwise overlap and surface penetration. Returns false for
/// scenes the simulator would start in an invalid configuration.
bool validate_scene(const Scene& scene);

// ---------------------------------------------------------------------------
// Fixed-width state encoding: 4 slots x 10 properties.

inline constexpr int kNumSlots = 4;
inline constexpr int kSlotProps = 10;
inline constexpr int kStateDim = kNumSlots * kSlotProps;

using StateVector = std::array<double, kStateDim>;

/// Per-quantity scale factors applied when packing a state vector.
struct NormalizationTable {
  double sigma_x = 10.0;
  double sigma_y = 10.0;
  double sigma_v = 10.0;
  double sigma_m = 5.0;
  double sigma_r = 0.5;
};

/// Packs (scene statics + body kinematics) into the slot layout
/// [present, x, y, vx, vy, m, r, mu, e, tag] per object, empty slots zero.
/// Objects land in the slot given by their id. Throws CapacityError when
/// the scene holds more objects than slots.
StateVector encode_final_state(const Scene& scene, const WorldState& state,
                               const NormalizationTable& norms);

}  // namespace cwmi
