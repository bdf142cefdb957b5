#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "cwmi/evaluator.hpp"
#include "cwmi/scenario.hpp"

using namespace cwmi;
namespace fs = std::filesystem;

namespace {

const DatasetGenerator& default_gen() {
  static const DatasetGenerator gen{GenConfig{}};
  return gen;
}

// Flattens every scalar a scene carries so two scenes can be diffed field by
// field. Labels are stable strings used in assertions.
std::vector<std::pair<std::string, double>> scene_scalars(const Scene& s) {
  std::vector<std::pair<std::string, double>> out;
  out.emplace_back("template", static_cast<double>(s.template_id));
  out.emplace_back("env.gravity", s.env.gravity);
  out.emplace_back("env.ground_y", s.env.ground_y);
  out.emplace_back("env.dt", s.env.dt);
  out.emplace_back("env.horizon", s.env.horizon);
  out.emplace_back("env.has_ramp", s.env.ramp ? 1.0 : 0.0);
  if (s.env.ramp) {
    out.emplace_back("ramp.angle", s.env.ramp->angle_deg);
    out.emplace_back("ramp.length", s.env.ramp->length);
    out.emplace_back("ramp.foot", s.env.ramp->foot_x);
  }
  out.emplace_back("object_count", static_cast<double>(s.objects.size()));
  for (const ObjectSpec& o : s.objects) {
    const std::string p = "obj" + std::to_string(o.id) + ".";
    out.emplace_back(p + "radius", o.radius);
    out.emplace_back(p + "mass", o.mass);
    out.emplace_back(p + "x", o.position.x);
    out.emplace_back(p + "y", o.position.y);
    out.emplace_back(p + "vx", o.velocity.x);
    out.emplace_back(p + "vy", o.velocity.y);
    out.emplace_back(p + "mu", o.friction_mu);
    out.emplace_back(p + "e", o.restitution_e);
    out.emplace_back(p + "tag", static_cast<double>(o.nuisance_tag));
  }
  return out;
}

std::vector<std::string> diff_labels(const Scene& a, const Scene& b) {
  const auto fa = scene_scalars(a);
  const auto fb = scene_scalars(b);
  REQUIRE(fa.size() == fb.size());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    REQUIRE(fa[i].first == fb[i].first);
    if (fa[i].second != fb[i].second) out.push_back(fa[i].first);
  }
  return out;
}

std::string expected_diff_label(const Intervention& iv) {
  const std::string p = "obj" + std::to_string(iv.object_id) + ".";
  switch (iv.field) {
    case InterventionField::Mass: return p + "mass";
    case InterventionField::Friction: return p + "mu";
    case InterventionField::Restitution: return p + "e";
    case InterventionField::InitSpeed: return p + "vx";
    case InterventionField::RampAngle: return "ramp.angle";
  }
  return "?";
}

// Sampling-range widths frozen by the generator; interventions must move at
// least a quarter of the relevant width.
double intervention_floor(TemplateId t, InterventionField f) {
  const double frac = kMinInterventionFrac;
  switch (f) {
    case InterventionField::Mass: return frac * 4.5;
    case InterventionField::Friction:
      return frac * (t == TemplateId::Ramp ? 0.16 : t == TemplateId::Projectile ? 0.4 : 0.6);
    case InterventionField::Restitution:
      return frac * (t == TemplateId::Drop ? 0.6
                     : t == TemplateId::Collide1d ? 0.325
                                                  : 0.4);
    case InterventionField::InitSpeed: return frac * 2.5;
    case InterventionField::RampAngle: return frac * 25.0;
  }
  return 0.0;
}

fs::path scratch_dir(const char* leaf) {
  const fs::path p = fs::temp_directory_path() / "cwmi_data_tests" / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("pair construction is deterministic") {
  const DatasetGenerator& gen = default_gen();
  const DatasetGenerator other{GenConfig{}};
  for (long i : {0L, 1L, 2L, 3L, 777L, 1601L, 1999L}) {
    const std::string a = pair_to_json_line(gen.make_pair(i));
    CHECK(a == pair_to_json_line(gen.make_pair(i)));
    CHECK(a == pair_to_json_line(other.make_pair(i)));
  }
  GenConfig reseeded;
  reseeded.seed = 8;
  const DatasetGenerator differently{reseeded};
  CHECK(pair_to_json_line(differently.make_pair(0)) != pair_to_json_line(gen.make_pair(0)));
}

TEST_CASE("each intervention edits exactly one scalar") {
  const DatasetGenerator& gen = default_gen();
  for (long i = 0; i < 200; ++i) {
    const ScenarioPair p = gen.make_pair(i * 7 % gen.pair_count());
    const std::vector<std::string> diffs = diff_labels(p.factual, p.counterfactual);
    REQUIRE(diffs.size() == 1);
    CHECK(diffs[0] == expected_diff_label(p.intervention));
  }
}

TEST_CASE("interventions are faithful records with a magnitude floor") {
  const DatasetGenerator& gen = default_gen();
  bool saw_ramp_angle = false, saw_init_speed = false;
  for (long i = 0; i < 400; ++i) {
    const ScenarioPair p = gen.make_pair(i);
    const Intervention& iv = p.intervention;
    const TemplateId t = p.factual.template_id;

    if (iv.field == InterventionField::InitSpeed) {
      saw_init_speed = true;
      const ObjectSpec& o = p.factual.objects[static_cast<std::size_t>(iv.object_id)];
      CHECK(o.velocity.x == iv.old_value);
      // speed changes, direction never does
      CHECK(std::signbit(iv.new_value) == std::signbit(iv.old_value));
      CHECK(std::abs(std::abs(iv.new_value) - std::abs(iv.old_value)) >=
            intervention_floor(t, iv.field) - 1e-12);
    } else if (iv.field == InterventionField::RampAngle) {
      saw_ramp_angle = true;
      CHECK(p.factual.env.ramp->angle_deg == iv.old_value);
      CHECK(iv.new_value < iv.old_value);  // steeper would cut into the disc
      CHECK(iv.new_value >= 20.0 - 1e-9);
      CHECK(iv.old_value - iv.new_value >= intervention_floor(t, iv.field) - 1e-12);
    } else {
      const ObjectSpec& o = p.factual.objects[static_cast<std::size_t>(iv.object_id)];
      const double actual = iv.field == InterventionField::Mass ? o.mass
                            : iv.field == InterventionField::Friction ? o.friction_mu
                                                                      : o.restitution_e;
      CHECK(actual == iv.old_value);
      CHECK(std::abs(iv.new_value - iv.old_value) >= intervention_floor(t, iv.field) - 1e-12);
    }
  }
  CHECK(saw_ramp_angle);
  CHECK(saw_init_speed);
}

TEST_CASE("splits partition the id range with a fixed template rotation") {
  const DatasetGenerator& gen = default_gen();
  const GenConfig cfg;
  CHECK(split_count_train(cfg) == 1600);
  CHECK(split_count_val(cfg) == 200);
  CHECK(split_count_test(cfg) == 200);
  CHECK(gen.pair_count() == 2000);
  CHECK(std::string(gen.split_of(0)) == "train");
  CHECK(std::string(gen.split_of(1599)) == "train");
  CHECK(std::string(gen.split_of(1600)) == "val");
  CHECK(std::string(gen.split_of(1799)) == "val");
  CHECK(std::string(gen.split_of(1800)) == "test");
  CHECK(std::string(gen.split_of(1999)) == "test");
  for (long i : {5L, 1602L, 1803L}) {
    const ScenarioPair p = gen.make_pair(i);
    CHECK(p.id == i);
    CHECK(p.split == gen.split_of(i));
    CHECK(p.factual.template_id == static_cast<TemplateId>(i % 4));
  }
}

TEST_CASE("question sides stay near balance and true states answer them") {
  const DatasetGenerator& gen = default_gen();
  long zeros_train = 0, n_train = 0, zeros_eval = 0, n_eval = 0;
  for (long i = 0; i < gen.pair_count(); ++i) {
    const ScenarioPair p = gen.make_pair(i);
    CHECK(answer_question(p.qa_f, p.state_f.data()) == p.qa_f.answer_index);
    CHECK(answer_question(p.qa_cf, p.state_cf.data()) == p.qa_cf.answer_index);
    const bool train = p.split == "train";
    for (const QaItem* qa : {&p.qa_f, &p.qa_cf}) {
      (train ? n_train : n_eval) += 1;
      if (qa->answer_index == 0) (train ? zeros_train : zeros_eval) += 1;
    }
  }
  const double frac_train = static_cast<double>(zeros_train) / static_cast<double>(n_train);
  const double frac_eval = static_cast<double>(zeros_eval) / static_cast<double>(n_eval);
  CHECK(frac_train >= 0.4);
  CHECK(frac_train <= 0.6);
  CHECK(frac_eval >= 0.35);
  CHECK(frac_eval <= 0.65);
}

TEST_CASE("nuisance tags track mass on train and decouple on eval") {
  const DatasetGenerator& gen = default_gen();
  const double median = mass_median();
  long agree_train = 0, n_train = 0, agree_eval = 0, n_eval = 0;
  for (long i = 0; i < gen.pair_count(); i += 2) {
    const ScenarioPair p = gen.make_pair(i);
    const bool train = p.split == "train";
    for (const ObjectSpec& o : p.factual.objects) {
      (train ? n_train : n_eval) += 1;
      if ((o.nuisance_tag == 1) == (o.mass > median)) (train ? agree_train : agree_eval) += 1;
    }
    // tags survive the intervention untouched
    for (std::size_t k = 0; k < p.factual.objects.size(); ++k) {
      CHECK(p.counterfactual.objects[k].nuisance_tag == p.factual.objects[k].nuisance_tag);
    }
  }
  CHECK(static_cast<double>(agree_train) / static_cast<double>(n_train) >= 0.88);
  const double eval_rate = static_cast<double>(agree_eval) / static_cast<double>(n_eval);
  CHECK(eval_rate >= 0.35);
  CHECK(eval_rate <= 0.65);
}

TEST_CASE("threshold bands are ordered and questions draw from them") {
  const DatasetGenerator& gen = default_gen();
  for (int ti = 0; ti < 4; ++ti) {
    const auto [lo, hi] = gen.threshold_band(static_cast<TemplateId>(ti));
    CHECK(std::isfinite(lo));
    CHECK(std::isfinite(hi));
    CHECK(lo <= hi);
  }
  for (long i = 0; i < 40; ++i) {
    const ScenarioPair p = gen.make_pair(i);
    const auto [lo, hi] = gen.threshold_band(p.factual.template_id);
    for (const QaItem* qa : {&p.qa_f, &p.qa_cf}) {
      CHECK(qa->options[0].pred.threshold >= lo);
      CHECK(qa->options[0].pred.threshold <= hi);
      CHECK(qa->options[0].pred.threshold == qa->options[1].pred.threshold);
      CHECK(qa->options[0].pred.greater != qa->options[1].pred.greater);
    }
  }
}

TEST_CASE("json lines round-trip losslessly") {
  const DatasetGenerator& gen = default_gen();
  for (long i = 0; i < 60; ++i) {
    const ScenarioPair p = gen.make_pair(i * 31 % gen.pair_count());
    const std::string line = pair_to_json_line(p);
    const ScenarioPair back = pair_from_json_line(line);
    CHECK(pair_to_json_line(back) == line);
    for (int j = 0; j < kStateDim; ++j) {
      CHECK(back.state_f[static_cast<std::size_t>(j)] ==
            p.state_f[static_cast<std::size_t>(j)]);
    }
    CHECK(back.qa_f.answer_index == p.qa_f.answer_index);
    CHECK(back.qa_cf.options[1].pred.threshold == p.qa_cf.options[1].pred.threshold);
  }
}

TEST_CASE("parsed scenes re-simulate to the recorded states bitwise") {
  const DatasetGenerator& gen = default_gen();
  const NormalizationTable norms;
  for (long i = 0; i < 24; ++i) {
    const ScenarioPair p =
        pair_from_json_line(pair_to_json_line(gen.make_pair(i * 83 % gen.pair_count())));
    const StateVector f = encode_final_state(p.factual, simulate(p.factual).final_state, norms);
    const StateVector cf =
        encode_final_state(p.counterfactual, simulate(p.counterfactual).final_state, norms);
    for (int j = 0; j < kStateDim; ++j) {
      CHECK(f[static_cast<std::size_t>(j)] == p.state_f[static_cast<std::size_t>(j)]);
      CHECK(cf[static_cast<std::size_t>(j)] == p.state_cf[static_cast<std::size_t>(j)]);
    }
  }
}

TEST_CASE("generated directories load back verified and are reproducible") {
  GenConfig cfg;
  cfg.pairs = 80;
  const DatasetGenerator gen{cfg};
  const fs::path a = scratch_dir("gen_a");
  const fs::path b = scratch_dir("gen_b");
  const DatasetManifest man = gen.generate(a.string());
  gen.generate(b.string());

  CHECK(man.schema_version == 1);
  CHECK(man.count_train == 64);
  CHECK(man.count_val == 8);
  CHECK(man.count_test == 8);
  long total = 0;
  for (const auto& [tpl, n] : man.template_counts) total += n;
  CHECK(total == 80);
  CHECK(man.content_hash.size() == 16);
  CHECK(man.split_hashes.size() == 3);

  for (const char* f :
       {"physica.train.jsonl", "physica.val.jsonl", "physica.test.jsonl",
        "physica.manifest.json"}) {
    CHECK(fs::exists(a / f));
    CHECK(read_bytes(a / f) == read_bytes(b / f));
  }

  const Dataset ds = load_dataset(a.string());
  CHECK(ds.train.size() == 64);
  CHECK(ds.val.size() == 8);
  CHECK(ds.test.size() == 8);
  CHECK(ds.split("val").size() == 8);
  for (const ScenarioPair& p : ds.train) CHECK(p.split == "train");
  CHECK(ds.manifest.content_hash == man.content_hash);
}

TEST_CASE("tampered or missing dataset files are rejected") {
  GenConfig cfg;
  cfg.pairs = 40;
  const DatasetGenerator gen{cfg};
  const fs::path dir = scratch_dir("tamper");
  gen.generate(dir.string());

  SUBCASE("bit flip in a split file") {
    const fs::path f = dir / "physica.train.jsonl";
    std::vector<char> bytes = read_bytes(f);
    bytes[bytes.size() / 2] ^= 0x01;
    std::ofstream(f, std::ios::binary | std::ios::trunc)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_AS(load_dataset(dir.string()), ConsistencyError);
  }
  SUBCASE("missing split file") {
    fs::remove(dir / "physica.val.jsonl");
    CHECK_THROWS_AS(load_dataset(dir.string()), IoError);
  }
  SUBCASE("missing directory") {
    CHECK_THROWS_AS(load_dataset((dir / "nope").string()), IoError);
  }
}

TEST_CASE("stale intervention records are rejected") {
  const DatasetGenerator& gen = default_gen();
  const ScenarioPair p = gen.make_pair(2);  // COLLIDE1D
  Intervention stale = p.intervention;
  stale.old_value += 0.5;
  CHECK_THROWS_AS(apply_intervention(p.factual, stale), ConsistencyError);

  Intervention orphan = p.intervention;
  orphan.object_id = 7;
  if (orphan.field != InterventionField::RampAngle) {
    CHECK_THROWS_AS(apply_intervention(p.factual, orphan), ConsistencyError);
  }

  Intervention rampless;
  rampless.field = InterventionField::RampAngle;
  rampless.old_value = 30.0;
  rampless.new_value = 22.0;
  const Scene drop = sample_scene(TemplateId::Drop, 4);
  CHECK_THROWS_AS(apply_intervention(drop, rampless), ConsistencyError);
}

}  // TEST_SUITE
