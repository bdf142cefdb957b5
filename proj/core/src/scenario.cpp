#include "cwmi/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "cwmi/hash.hpp"

namespace cwmi {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

struct Range {
  double lo, hi;
  double width() const { return hi - lo; }
};

// Per-template sampling ranges. These double as the admissible ranges for
// intervened values.
constexpr Range kMass{0.5, 5.0};
constexpr Range kDropHeight{2.0, 8.0};
constexpr Range kDropRadius{0.1, 0.4};
constexpr Range kDropE{0.3, 0.9};
constexpr Range kDropMu{0.2, 0.8};
constexpr Range kDropX{-2.0, 2.0};
constexpr Range kRampAngle{20.0, 45.0};
constexpr Range kRampLen{1.2, 2.5};
constexpr Range kRampMu{0.12, 0.28};
constexpr Range kRampRadius{0.1, 0.4};
constexpr Range kRampFoot{0.0, 1.0};
constexpr Range kCollRadius{0.15, 0.35};
constexpr Range kCollE{0.65, 0.975};
constexpr Range kCollX1{-2.0, -1.0};
constexpr Range kCollX2{1.0, 2.0};
constexpr Range kCollSpeed{1.5, 4.0};     // opposing mode, both bodies
constexpr Range kCollV1Over{2.5, 4.0};    // overtaking mode
constexpr Range kCollV2Over{0.5, 1.0};
constexpr Range kProjSpeed{3.0, 7.0};
constexpr Range kProjAngle{25.0, 65.0};
constexpr Range kProjMu{0.3, 0.7};
constexpr Range kProjE{0.0, 0.4};
constexpr Range kProjX{-1.0, 1.0};

double draw(Rng& rng, const Range& r) { return rng.uniform(r.lo, r.hi); }

// Salient (slot, property) asked about per template. Property indices into
// the slot layout: 1 = x, 2 = y, 3 = vx, 4 = vy.
void salient_probe(TemplateId t, int& slot, int& prop) {
  switch (t) {
    case TemplateId::Drop: slot = 0; prop = 2; return;
    case TemplateId::Ramp: slot = 0; prop = 1; return;
    case TemplateId::Collide1d: slot = 1; prop = 3; return;
    case TemplateId::Projectile: slot = 0; prop = 1; return;
  }
  throw ContractError("bad template");
}

const char* prop_label(int prop) {
  switch (prop) {
    case 1: return "x";
    case 2: return "y";
    case 3: return "vx";
    case 4: return "vy";
  }
  throw ContractError("no question label for property " + std::to_string(prop));
}

std::string fmt4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// Resamples until the new value moves at least the minimum fraction of the
// range away from the old one.
double resample_away(Rng& rng, const Range& r, double old_value) {
  const double min_delta = kMinInterventionFrac * r.width();
  for (int tries = 0; tries < 1000; ++tries) {
    const double v = draw(rng, r);
    if (std::abs(v - old_value) >= min_delta) return v;
  }
  throw GenerationError("could not draw an intervention value far enough from " +
                        std::to_string(old_value));
}

void assign_tags(Scene& s, double rho, Rng& rng) {
  for (ObjectSpec& o : s.objects) {
    const bool heavy = o.mass > mass_median();
    const bool agree = rng.bernoulli(rho);
    o.nuisance_tag = (agree == heavy) ? 1 : 0;
  }
}

ordered_json scene_to_json_obj(const Scene& s) {
  ordered_json j;
  j["template"] = template_name(s.template_id);
  ordered_json env;
  env["gravity"] = s.env.gravity;
  env["ground_y"] = s.env.ground_y;
  env["dt"] = s.env.dt;
  env["horizon"] = s.env.horizon;
  if (s.env.ramp) {
    ordered_json r;
    r["angle_deg"] = s.env.ramp->angle_deg;
    r["length"] = s.env.ramp->length;
    r["foot_x"] = s.env.ramp->foot_x;
    env["ramp"] = std::move(r);
  } else {
    env["ramp"] = nullptr;
  }
  j["env"] = std::move(env);
  ordered_json objs = ordered_json::array();
  for (const ObjectSpec& o : s.objects) {
    ordered_json jo;
    jo["id"] = o.id;
    jo["radius"] = o.radius;
    jo["mass"] = o.mass;
    jo["x"] = o.position.x;
    jo["y"] = o.position.y;
    jo["vx"] = o.velocity.x;
    jo["vy"] = o.velocity.y;
    jo["mu"] = o.friction_mu;
    jo["e"] = o.restitution_e;
    jo["tag"] = o.nuisance_tag;
    objs.push_back(std::move(jo));
  }
  j["objects"] = std::move(objs);
  return j;
}

Scene scene_from_json_obj(const ordered_json& j) {
  Scene s;
  s.template_id = template_from_name(j.at("template").get<std::string>());
  const auto& env = j.at("env");
  s.env.gravity = env.at("gravity").get<double>();
  s.env.ground_y = env.at("ground_y").get<double>();
  s.env.dt = env.at("dt").get<double>();
  s.env.horizon = env.at("horizon").get<double>();
  if (!env.at("ramp").is_null()) {
    RampSpec r;
    r.angle_deg = env.at("ramp").at("angle_deg").get<double>();
    r.length = env.at("ramp").at("length").get<double>();
    r.foot_x = env.at("ramp").at("foot_x").get<double>();
    s.env.ramp = r;
  }
  for (const auto& jo : j.at("objects")) {
    ObjectSpec o;
    o.id = jo.at("id").get<int>();
    o.radius = jo.at("radius").get<double>();
    o.mass = jo.at("mass").get<double>();
    o.position = {jo.at("x").get<double>(), jo.at("y").get<double>()};
    o.velocity = {jo.at("vx").get<double>(), jo.at("vy").get<double>()};
    o.friction_mu = jo.at("mu").get<double>();
    o.restitution_e = jo.at("e").get<double>();
    o.nuisance_tag = jo.at("tag").get<int>();
    s.objects.push_back(o);
  }
  return s;
}

ordered_json qa_to_json(const QaItem& qa) {
  ordered_json j;
  j["question"] = qa.question;
  ordered_json opts = ordered_json::array();
  for (const QaOption& o : qa.options) {
    ordered_json jo;
    jo["text"] = o.text;
    jo["slot"] = o.pred.slot;
    jo["prop"] = o.pred.prop;
    jo["greater"] = o.pred.greater;
    jo["threshold"] = o.pred.threshold;
    opts.push_back(std::move(jo));
  }
  j["options"] = std::move(opts);
  j["answer_index"] = qa.answer_index;
  return j;
}

QaItem qa_from_json(const ordered_json& j) {
  QaItem qa;
  qa.question = j.at("question").get<std::string>();
  const auto& opts = j.at("options");
  if (opts.size() != 2) throw ConsistencyError("question does not have exactly two options");
  for (std::size_t i = 0; i < 2; ++i) {
    QaOption o;
    o.text = opts[i].at("text").get<std::string>();
    o.pred.slot = opts[i].at("slot").get<int>();
    o.pred.prop = opts[i].at("prop").get<int>();
    o.pred.greater = opts[i].at("greater").get<bool>();
    o.pred.threshold = opts[i].at("threshold").get<double>();
    qa.options[i] = std::move(o);
  }
  qa.answer_index = j.at("answer_index").get<int>();
  if (qa.answer_index != 0 && qa.answer_index != 1) {
    throw ConsistencyError("answer_index outside {0,1}");
  }
  return qa;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + p.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

const char* kSplitNames[3] = {"train", "val", "test"};

}  // namespace

const char* intervention_field_name(InterventionField f) {
  switch (f) {
    case InterventionField::Mass: return "MASS";
    case InterventionField::Friction: return "FRICTION";
    case InterventionField::Restitution: return "RESTITUTION";
    case InterventionField::InitSpeed: return "INIT_SPEED";
    case InterventionField::RampAngle: return "RAMP_ANGLE";
  }
  return "?";
}

InterventionField intervention_field_from_name(const std::string& name) {
  if (name == "MASS") return InterventionField::Mass;
  if (name == "FRICTION") return InterventionField::Friction;
  if (name == "RESTITUTION") return InterventionField::Restitution;
  if (name == "INIT_SPEED") return InterventionField::InitSpeed;
  if (name == "RAMP_ANGLE") return InterventionField::RampAngle;
  throw ConsistencyError("unknown intervention field: " + name);
}

double mass_median() { return 0.5 * (kMass.lo + kMass.hi); }

Scene sample_scene(TemplateId t, std::uint64_t seed) {
  Rng rng(seed);
  Scene s;
  switch (t) {
    case TemplateId::Drop: {
      const double h = draw(rng, kDropHeight);
      const double r = draw(rng, kDropRadius);
      const double m = draw(rng, kMass);
      const double e = draw(rng, kDropE);
      const double mu = draw(rng, kDropMu);
      const double x0 = draw(rng, kDropX);
      s = make_drop_scene(h, r, m, mu, e, x0);
      break;
    }
    case TemplateId::Ramp: {
      const double theta = draw(rng, kRampAngle);
      const double len = draw(rng, kRampLen);
      const double mu = draw(rng, kRampMu);
      const double r = draw(rng, kRampRadius);
      const double m = draw(rng, kMass);
      const double foot = draw(rng, kRampFoot);
      s = make_ramp_scene(theta, len, mu, r, m, foot);
      break;
    }
    case TemplateId::Collide1d: {
      const bool opposing = rng.bernoulli(0.5);
      const double r = draw(rng, kCollRadius);
      const double m1 = draw(rng, kMass);
      const double m2 = draw(rng, kMass);
      const double e1 = draw(rng, kCollE);
      const double e2 = draw(rng, kCollE);
      const double x1 = draw(rng, kCollX1);
      const double x2 = draw(rng, kCollX2);
      const double v1 = opposing ? draw(rng, kCollSpeed) : draw(rng, kCollV1Over);
      const double v2 = opposing ? -draw(rng, kCollSpeed) : draw(rng, kCollV2Over);
      s = make_collide_scene(m1, m2, e1, e2, v1, v2, r, x1, x2);
      break;
    }
    case TemplateId::Projectile: {
      const double v = draw(rng, kProjSpeed);
      const double phi = draw(rng, kProjAngle);
      const double mu = draw(rng, kProjMu);
      const double e = draw(rng, kProjE);
      const double r = draw(rng, kDropRadius);
      const double m = draw(rng, kMass);
      const double x0 = draw(rng, kProjX);
      s = make_projectile_scene(v, phi, r, m, mu, e, x0);
      break;
    }
  }
  if (!validate_scene(s)) {
    throw GenerationError(std::string("sampled invalid scene for template ") +
                          template_name(t));
  }
  return s;
}

Scene apply_intervention(const Scene& scene, const Intervention& iv) {
  Scene out = scene;
  auto check_old = [&](double actual) {
    if (actual != iv.old_value) {
      throw ConsistencyError(std::string("intervention old_value mismatch on ") +
                             intervention_field_name(iv.field) + ": scene has " +
                             std::to_string(actual) + ", record says " +
                             std::to_string(iv.old_value));
    }
  };
  if (iv.field == InterventionField::RampAngle) {
    if (!out.env.ramp) throw ConsistencyError("RAMP_ANGLE intervention on a scene without ramp");
    check_old(out.env.ramp->angle_deg);
    out.env.ramp->angle_deg = iv.new_value;
    return out;
  }
  ObjectSpec* target = nullptr;
  for (ObjectSpec& o : out.objects) {
    if (o.id == iv.object_id) target = &o;
  }
  if (!target) {
    throw ConsistencyError("intervention targets missing object id " +
                           std::to_string(iv.object_id));
  }
  switch (iv.field) {
    case InterventionField::Mass:
      check_old(target->mass);
      target->mass = iv.new_value;
      break;
    case InterventionField::Friction:
      check_old(target->friction_mu);
      target->friction_mu = iv.new_value;
      break;
    case InterventionField::Restitution:
      check_old(target->restitution_e);
      target->restitution_e = iv.new_value;
      break;
    case InterventionField::InitSpeed:
      check_old(target->velocity.x);
      target->velocity.x = iv.new_value;
      break;
    case InterventionField::RampAngle:
      break;  // handled above
  }
  return out;
}

DatasetGenerator::DatasetGenerator(const GenConfig& cfg) : cfg_(cfg) {
  constexpr int kProbes = 400;
  const NormalizationTable norms;
  for (int ti = 0; ti < 4; ++ti) {
    const TemplateId t = static_cast<TemplateId>(ti);
    int slot = 0, prop = 0;
    salient_probe(t, slot, prop);
    std::vector<double> values;
    values.reserve(kProbes);
    for (int k = 0; k < kProbes; ++k) {
      const Scene s =
          sample_scene(t, derive_seed(cfg_.seed, "probe", static_cast<std::uint64_t>(ti) *
                                                              kProbes +
                                                          static_cast<std::uint64_t>(k)));
      const SimulationResult res = simulate(s);
      const StateVector sv = encode_final_state(s, res.final_state, norms);
      values.push_back(sv[static_cast<std::size_t>(slot * kSlotProps + prop)]);
    }
    std::sort(values.begin(), values.end());
    const auto at_q = [&](double q) {
      return values[static_cast<std::size_t>(q * (kProbes - 1))];
    };
    bands_[static_cast<std::size_t>(ti)] = {at_q(0.4), at_q(0.6)};
  }
}

std::pair<double, double> DatasetGenerator::threshold_band(TemplateId t) const {
  return bands_[static_cast<std::size_t>(t)];
}

const char* DatasetGenerator::split_of(long index) const {
  if (index < split_count_train(cfg_)) return "train";
  if (index < split_count_train(cfg_) + split_count_val(cfg_)) return "val";
  return "test";
}

QaItem DatasetGenerator::synthesize_qa(const Scene& scene, const StateVector& state,
                                       std::uint64_t seed) const {
  int slot = 0, prop = 0;
  salient_probe(scene.template_id, slot, prop);
  const double value = state[static_cast<std::size_t>(slot * kSlotProps + prop)];
  const auto [lo, hi] = bands_[static_cast<std::size_t>(scene.template_id)];

  Rng rng(seed);
  double thr = rng.uniform(lo, hi);
  for (int guard = 0; thr == value && guard < 64; ++guard) {
    thr = guard < 32 ? rng.uniform(lo, hi) : std::nextafter(thr, hi + 1.0);
  }

  QaItem qa;
  qa.question = std::string("Is the final normalized ") + prop_label(prop) + " of object " +
                std::to_string(slot) + " greater than " + fmt4(thr) + "?";
  QaOption above{std::string("greater than ") + fmt4(thr), {slot, prop, true, thr}};
  QaOption below{std::string("less than ") + fmt4(thr), {slot, prop, false, thr}};
  const bool above_first = rng.bernoulli(0.5);
  qa.options[0] = above_first ? above : below;
  qa.options[1] = above_first ? below : above;
  const bool is_above = value > thr;
  qa.answer_index = (is_above == above_first) ? 0 : 1;
  return qa;
}

ScenarioPair DatasetGenerator::make_pair(long index) const {
  if (index < 0 || index >= cfg_.pairs) throw ContractError("pair index out of range");
  const TemplateId t = static_cast<TemplateId>(index % 4);
  const std::string split = split_of(index);
  const double rho = split == "train" ? cfg_.rho_train : cfg_.rho_eval;

  ScenarioPair pair;
  pair.id = index;
  pair.split = split;
  pair.factual = sample_scene(t, derive_seed(cfg_.seed, "scene", static_cast<std::uint64_t>(index)));
  Rng tag_rng(derive_seed(cfg_.seed, "tag", static_cast<std::uint64_t>(index)));
  assign_tags(pair.factual, rho, tag_rng);

  Rng iv_rng(derive_seed(cfg_.seed, "iv", static_cast<std::uint64_t>(index)));
  pair.intervention = [&]() -> Intervention {
    Intervention iv;
    const std::vector<ObjectSpec>& objs = pair.factual.objects;
    switch (t) {
      case TemplateId::Drop: {
        const ObjectSpec& o = objs[0];
        // Restitution drives the visible outcome; mass is a deliberate null
        // intervention for this template.
        const std::uint64_t pick = iv_rng.uniform_index(3);
        if (pick < 2) {
          iv = {InterventionField::Restitution, 0, o.restitution_e,
                resample_away(iv_rng, kDropE, o.restitution_e)};
        } else {
          iv = {InterventionField::Mass, 0, o.mass, resample_away(iv_rng, kMass, o.mass)};
        }
        return iv;
      }
      case TemplateId::Ramp: {
        const ObjectSpec& o = objs[0];
        const double theta = pair.factual.env.ramp->angle_deg;
        const bool angle_ok =
            theta - kMinInterventionFrac * kRampAngle.width() > kRampAngle.lo + 1e-9;
        const std::uint64_t pick = iv_rng.uniform_index(angle_ok ? 4 : 3);
        if (pick < 2) {
          iv = {InterventionField::Friction, 0, o.friction_mu,
                resample_away(iv_rng, kRampMu, o.friction_mu)};
        } else if (pick == 2) {
          iv = {InterventionField::Mass, 0, o.mass, resample_away(iv_rng, kMass, o.mass)};
        } else {
          // Decrease-only: a steeper ramp would intersect the disc in place.
          const double upper = theta - kMinInterventionFrac * kRampAngle.width();
          iv = {InterventionField::RampAngle, 0, theta, iv_rng.uniform(kRampAngle.lo, upper)};
        }
        return iv;
      }
      case TemplateId::Collide1d: {
        const int who = static_cast<int>(iv_rng.uniform_index(2));
        const ObjectSpec& o = objs[static_cast<std::size_t>(who)];
        const bool opposing = objs[1].velocity.x < 0.0;
        const std::uint64_t pick = iv_rng.uniform_index(opposing ? 5 : 4);
        if (pick < 3) {
          iv = {InterventionField::Mass, who, o.mass, resample_away(iv_rng, kMass, o.mass)};
        } else if (pick == 3) {
          iv = {InterventionField::Restitution, who, o.restitution_e,
                resample_away(iv_rng, kCollE, o.restitution_e)};
        } else {
          const double mag = std::abs(o.velocity.x);
          const double new_mag = resample_away(iv_rng, kCollSpeed, mag);
          iv = {InterventionField::InitSpeed, who, o.velocity.x,
                std::copysign(new_mag, o.velocity.x)};
        }
        return iv;
      }
      case TemplateId::Projectile: {
        const ObjectSpec& o = objs[0];
        const std::uint64_t pick = iv_rng.uniform_index(4);
        if (pick < 2) {
          iv = {InterventionField::Friction, 0, o.friction_mu,
                resample_away(iv_rng, kProjMu, o.friction_mu)};
        } else if (pick == 2) {
          iv = {InterventionField::Restitution, 0, o.restitution_e,
                resample_away(iv_rng, kProjE, o.restitution_e)};
        } else {
          iv = {InterventionField::Mass, 0, o.mass, resample_away(iv_rng, kMass, o.mass)};
        }
        return iv;
      }
    }
    throw ContractError("bad template");
  }();

  pair.counterfactual = apply_intervention(pair.factual, pair.intervention);
  if (!validate_scene(pair.factual) || !validate_scene(pair.counterfactual)) {
    throw GenerationError("pair " + std::to_string(index) + " produced an invalid scene");
  }

  const NormalizationTable norms;
  try {
    pair.state_f = encode_final_state(pair.factual, simulate(pair.factual).final_state, norms);
    pair.state_cf =
        encode_final_state(pair.counterfactual, simulate(pair.counterfactual).final_state, norms);
  } catch (const SimulationDivergedError& e) {
    throw GenerationError("pair " + std::to_string(index) + ": " + e.what());
  }

  pair.qa_f = synthesize_qa(pair.factual, pair.state_f,
                            derive_seed(cfg_.seed, "qa", 2 * static_cast<std::uint64_t>(index)));
  pair.qa_cf =
      synthesize_qa(pair.counterfactual, pair.state_cf,
                    derive_seed(cfg_.seed, "qa", 2 * static_cast<std::uint64_t>(index) + 1));
  return pair;
}

std::string pair_to_json_line(const ScenarioPair& pair) {
  ordered_json j;
  j["id"] = pair.id;
  j["split"] = pair.split;
  j["template"] = template_name(pair.factual.template_id);
  ordered_json iv;
  iv["field"] = intervention_field_name(pair.intervention.field);
  iv["object_id"] = pair.intervention.object_id;
  iv["old_value"] = pair.intervention.old_value;
  iv["new_value"] = pair.intervention.new_value;
  j["intervention"] = std::move(iv);
  j["factual"] = scene_to_json_obj(pair.factual);
  j["counterfactual"] = scene_to_json_obj(pair.counterfactual);
  j["state_f"] = pair.state_f;
  j["state_cf"] = pair.state_cf;
  j["qa_f"] = qa_to_json(pair.qa_f);
  j["qa_cf"] = qa_to_json(pair.qa_cf);
  return j.dump();
}

ScenarioPair pair_from_json_line(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const std::exception& e) {
    throw IoError("dataset record parse failure: " + std::string(e.what()));
  }
  ScenarioPair pair;
  pair.id = j.at("id").get<long>();
  pair.split = j.at("split").get<std::string>();
  const auto& iv = j.at("intervention");
  pair.intervention.field = intervention_field_from_name(iv.at("field").get<std::string>());
  pair.intervention.object_id = iv.at("object_id").get<int>();
  pair.intervention.old_value = iv.at("old_value").get<double>();
  pair.intervention.new_value = iv.at("new_value").get<double>();
  pair.factual = scene_from_json_obj(j.at("factual"));
  pair.counterfactual = scene_from_json_obj(j.at("counterfactual"));
  const auto sf = j.at("state_f").get<std::vector<double>>();
  const auto scf = j.at("state_cf").get<std::vector<double>>();
  if (sf.size() != kStateDim || scf.size() != kStateDim) {
    throw ConsistencyError("state vectors must have " + std::to_string(kStateDim) + " entries");
  }
  std::copy(sf.begin(), sf.end(), pair.state_f.begin());
  std::copy(scf.begin(), scf.end(), pair.state_cf.begin());
  pair.qa_f = qa_from_json(j.at("qa_f"));
  pair.qa_cf = qa_from_json(j.at("qa_cf"));
  if (j.at("template").get<std::string>() != template_name(pair.factual.template_id)) {
    throw ConsistencyError("record template disagrees with factual scene");
  }
  return pair;
}

std::string scene_to_json(const Scene& scene) { return scene_to_json_obj(scene).dump(); }

Scene scene_from_json(const std::string& text) {
  return scene_from_json_obj(ordered_json::parse(text));
}

DatasetManifest DatasetGenerator::generate(const std::string& out_dir) const {
  fs::create_directories(out_dir);
  std::string buf[3];
  std::map<std::string, long> template_counts;
  std::unordered_map<std::uint64_t, long> seen;

  for (long i = 0; i < cfg_.pairs; ++i) {
    const ScenarioPair pair = make_pair(i);
    const std::string line = pair_to_json_line(pair);
    const std::string scene_key =
        scene_to_json(pair.factual) + "|" + scene_to_json(pair.counterfactual);
    const std::uint64_t key = fnv1a64(scene_key.data(), scene_key.size());
    auto [it, inserted] = seen.emplace(key, i);
    if (!inserted) {
      throw GenerationError("duplicate scene pair at indices " + std::to_string(it->second) +
                            " and " + std::to_string(i));
    }
    int si = pair.split == "train" ? 0 : pair.split == "val" ? 1 : 2;
    buf[si] += line;
    buf[si] += '\n';
    template_counts[template_name(pair.factual.template_id)]++;
  }

  DatasetManifest man;
  man.gen = cfg_;
  man.count_train = split_count_train(cfg_);
  man.count_val = split_count_val(cfg_);
  man.count_test = split_count_test(cfg_);
  man.template_counts = std::move(template_counts);

  Fnv1a64 all;
  for (int si = 0; si < 3; ++si) {
    const fs::path p = fs::path(out_dir) / (std::string("physica.") + kSplitNames[si] + ".jsonl");
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write dataset split: " + p.string());
    out.write(buf[si].data(), static_cast<std::streamsize>(buf[si].size()));
    if (!out) throw IoError("short write: " + p.string());
    man.split_hashes[kSplitNames[si]] = hex64(fnv1a64(buf[si].data(), buf[si].size()));
    all.update(buf[si].data(), buf[si].size());
  }
  man.content_hash = hex64(all.digest());

  ordered_json j;
  j["schema_version"] = man.schema_version;
  ordered_json gj;
  gj["pairs"] = cfg_.pairs;
  gj["split_train"] = cfg_.split_train;
  gj["split_val"] = cfg_.split_val;
  gj["split_test"] = cfg_.split_test;
  gj["seed"] = cfg_.seed;
  gj["rho_train"] = cfg_.rho_train;
  gj["rho_eval"] = cfg_.rho_eval;
  j["gen"] = std::move(gj);
  ordered_json nj;
  nj["sigma_x"] = man.norms.sigma_x;
  nj["sigma_y"] = man.norms.sigma_y;
  nj["sigma_v"] = man.norms.sigma_v;
  nj["sigma_m"] = man.norms.sigma_m;
  nj["sigma_r"] = man.norms.sigma_r;
  j["norms"] = std::move(nj);
  ordered_json cj;
  cj["train"] = man.count_train;
  cj["val"] = man.count_val;
  cj["test"] = man.count_test;
  j["counts"] = std::move(cj);
  j["template_counts"] = man.template_counts;
  j["split_hashes"] = man.split_hashes;
  j["content_hash"] = man.content_hash;

  const fs::path mp = fs::path(out_dir) / "physica.manifest.json";
  std::ofstream mout(mp, std::ios::binary | std::ios::trunc);
  if (!mout) throw IoError("cannot write manifest: " + mp.string());
  const std::string mtext = j.dump(2) + "\n";
  mout.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  return man;
}

DatasetManifest load_manifest(const std::string& dir) {
  const fs::path mp = fs::path(dir) / "physica.manifest.json";
  ordered_json j;
  try {
    j = ordered_json::parse(file_bytes(mp));
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError("manifest parse failure: " + std::string(e.what()));
  }
  DatasetManifest man;
  man.schema_version = j.at("schema_version").get<int>();
  if (man.schema_version != 1) {
    throw ConsistencyError("unsupported dataset schema version " +
                           std::to_string(man.schema_version));
  }
  const auto& gj = j.at("gen");
  man.gen.pairs = gj.at("pairs").get<long>();
  man.gen.split_train = gj.at("split_train").get<double>();
  man.gen.split_val = gj.at("split_val").get<double>();
  man.gen.split_test = gj.at("split_test").get<double>();
  man.gen.seed = gj.at("seed").get<std::uint64_t>();
  man.gen.rho_train = gj.at("rho_train").get<double>();
  man.gen.rho_eval = gj.at("rho_eval").get<double>();
  const auto& nj = j.at("norms");
  man.norms.sigma_x = nj.at("sigma_x").get<double>();
  man.norms.sigma_y = nj.at("sigma_y").get<double>();
  man.norms.sigma_v = nj.at("sigma_v").get<double>();
  man.norms.sigma_m = nj.at("sigma_m").get<double>();
  man.norms.sigma_r = nj.at("sigma_r").get<double>();
  man.count_train = j.at("counts").at("train").get<long>();
  man.count_val = j.at("counts").at("val").get<long>();
  man.count_test = j.at("counts").at("test").get<long>();
  man.template_counts = j.at("template_counts").get<std::map<std::string, long>>();
  man.split_hashes = j.at("split_hashes").get<std::map<std::string, std::string>>();
  man.content_hash = j.at("content_hash").get<std::string>();
  return man;
}

const std::vector<ScenarioPair>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ContractError("unknown split: " + name);
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  ds.manifest = load_manifest(dir);

  Fnv1a64 all;
  for (int si = 0; si < 3; ++si) {
    const std::string name = kSplitNames[si];
    const fs::path p = fs::path(dir) / ("physica." + name + ".jsonl");
    const std::string bytes = file_bytes(p);
    all.update(bytes.data(), bytes.size());
    if (hex64(fnv1a64(bytes.data(), bytes.size())) != ds.manifest.split_hashes.at(name)) {
      throw ConsistencyError("split file does not match its manifest hash: " + p.string());
    }
    std::vector<ScenarioPair>& out = si == 0 ? ds.train : si == 1 ? ds.val : ds.test;
    std::size_t start = 0;
    while (start < bytes.size()) {
      std::size_t end = bytes.find('\n', start);
      if (end == std::string::npos) end = bytes.size();
      if (end > start) {
        ScenarioPair pair = pair_from_json_line(bytes.substr(start, end - start));
        if (pair.split != name) {
          throw ConsistencyError("pair " + std::to_string(pair.id) + " labeled '" + pair.split +
                                 "' found in split file '" + name + "'");
        }
        out.push_back(std::move(pair));
      }
      start = end + 1;
    }
    const long expect = si == 0   ? ds.manifest.count_train
                        : si == 1 ? ds.manifest.count_val
                                  : ds.manifest.count_test;
    if (static_cast<long>(out.size()) != expect) {
      throw CoverageError("split '" + name + "' has " + std::to_string(out.size()) +
                          " pairs, manifest promises " + std::to_string(expect));
    }
  }
  if (hex64(all.digest()) != ds.manifest.content_hash) {
    throw ConsistencyError("dataset content hash mismatch");
  }
  return ds;
}

}  // namespace cwmi
