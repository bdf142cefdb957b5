#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cwmi/config.hpp"
#include "cwmi/physics.hpp"
#include "cwmi/rng.hpp"

namespace cwmi {

enum class InterventionField : int {
  Mass = 0,
  Friction = 1,
  Restitution = 2,
  InitSpeed = 3,
  RampAngle = 4,
};

const char* intervention_field_name(InterventionField f);
InterventionField intervention_field_from_name(const std::string& name);

/// A single-variable do() edit: one named field of one object (or the ramp
/// angle) changes from old_value to new_value; everything else is copied.
struct Intervention {
  InterventionField field = InterventionField::Mass;
  int object_id = 0;
  double old_value = 0.0;
  double new_value = 0.0;
};

struct QaPredicate {
  int slot = 0;
  int prop = 0;      // index into the 10 slot properties
  bool greater = true;
  double threshold = 0.0;
};

struct QaOption {
  std::string text;
  QaPredicate pred;
};

/// Binary question answerable from the encoded final state by evaluating
/// each option's predicate margin.
struct QaItem {
  std::string question;
  std::array<QaOption, 2> options;
  int answer_index = 0;
};

struct ScenarioPair {
  long id = 0;
  std::string split;
  Scene factual;
  Scene counterfactual;
  Intervention intervention;
  StateVector state_f{};
  StateVector state_cf{};
  QaItem qa_f;
  QaItem qa_cf;
};

struct DatasetManifest {
  int schema_version = 1;
  GenConfig gen;
  NormalizationTable norms;
  long count_train = 0;
  long count_val = 0;
  long count_test = 0;
  std::map<std::string, long> template_counts;
  std::map<std::string, std::string> split_hashes;
  std::string content_hash;  // over the three split files, train/val/test order
};

/// Draws one scene from a template's parameter ranges. Deterministic in
/// (template, seed); nuisance tags are left at zero.
Scene sample_scene(TemplateId t, std::uint64_t seed);

/// Returns a copy of `scene` with exactly the intervened field changed.
/// Throws ConsistencyError when old_value does not match the scene, or the
/// edit does not apply (bad object id, missing ramp).
Scene apply_intervention(const Scene& scene, const Intervention& iv);

/// Midpoint of the shared mass sampling range; tags correlate with being
/// above it.
double mass_median();

/// Intervention magnitude floor: new values must move at least this
/// fraction of the field's sampling range.
inline constexpr double kMinInterventionFrac = 0.25;

/// Deterministic scenario-pair generator. Threshold ranges for question
/// synthesis are calibrated once per instance from seeded probe rollouts.
class DatasetGenerator {
 public:
  explicit DatasetGenerator(const GenConfig& cfg);

  /// Builds pair `index` (scene pair, states, questions). Deterministic in
  /// (cfg.seed, index).
  ScenarioPair make_pair(long index) const;

  long pair_count() const { return cfg_.pairs; }
  const char* split_of(long index) const;

  /// Per-template [q40, q60] band of the salient outcome, used as the
  /// threshold range for questions.
  std::pair<double, double> threshold_band(TemplateId t) const;

  /// Writes physica.{train,val,test}.jsonl plus physica.manifest.json into
  /// `out_dir` and returns the manifest.
  DatasetManifest generate(const std::string& out_dir) const;

 private:
  QaItem synthesize_qa(const Scene& scene, const StateVector& state, std::uint64_t seed) const;
  GenConfig cfg_;
  std::array<std::pair<double, double>, 4> bands_{};
};

std::string pair_to_json_line(const ScenarioPair& pair);
ScenarioPair pair_from_json_line(const std::string& line);

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);

struct Dataset {
  DatasetManifest manifest;
  std::vector<ScenarioPair> train;
  std::vector<ScenarioPair> val;
  std::vector<ScenarioPair> test;

  const std::vector<ScenarioPair>& split(const std::string& name) const;
};

/// Reads a generated dataset directory; verifies per-split content hashes
/// and pair coverage. Throws IoError / ConsistencyError / CoverageError.
Dataset load_dataset(const std::string& dir);

DatasetManifest load_manifest(const std::string& dir);

}  // namespace cwmi
