#pragma once

#include <map>
#include <string>
#include <vector>

#include "cwmi/trainer.hpp"

namespace cwmi {

/// Per-pair evaluation record.
struct PairEval {
  long id = 0;
  std::string tpl;
  double mse_f = 0.0;   // factual state error
  double mse_cf = 0.0;  // counterfactual state error
  int answer_f = 0;
  int answer_cf = 0;
  bool correct_f = false;
  bool correct_cf = false;
};

struct Metrics {
  long pairs = 0;
  double acc_f = 0.0;
  double acc_cf = 0.0;
  double acc_overall = 0.0;  // mean of the two accuracies
  double fspa = 0.0;         // mean over pairs of (mse_f + mse_cf) / 2
  double ccs = 0.0;          // fraction with both answers correct
};

/// Answers a two-option question from a (possibly predicted) state vector by
/// predicate margin; exact ties fall to option 0.
int answer_question(const QaItem& qa, const double* state);

Metrics compute_metrics(const std::vector<PairEval>& rows);

/// Rows restricted to one template name ("DROP", ...).
Metrics metrics_for_template(const std::vector<PairEval>& rows, const std::string& tpl);

struct EvalOutput {
  Metrics metrics;
  std::vector<PairEval> rows;
};

/// Scores the model on pair-aligned cached encoder rows.
EvalOutput evaluate_pairs(const WorldModel& model, const std::vector<ScenarioPair>& pairs,
                          const EncodedSplit& rows);

/// Writes report.json, report.csv, report.txt and pairs.jsonl into `dir`.
void write_eval_report(const std::string& dir, const RunConfig& cfg,
                       const std::string& split_name, const EvalOutput& out);

}  // namespace cwmi
