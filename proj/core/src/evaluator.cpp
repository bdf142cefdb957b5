#include "cwmi/evaluator.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cwmi/losses.hpp"

namespace cwmi {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string fixed4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

ordered_json metrics_json(const Metrics& m) {
  ordered_json j;
  j["pairs"] = m.pairs;
  j["acc_f"] = m.acc_f;
  j["acc_cf"] = m.acc_cf;
  j["acc_overall"] = m.acc_overall;
  j["fspa"] = m.fspa;
  j["ccs"] = m.ccs;
  return j;
}

}  // namespace

int answer_question(const QaItem& qa, const double* state) {
  double best = 0.0;
  int pick = 0;
  for (int i = 0; i < 2; ++i) {
    const QaPredicate& p = qa.options[static_cast<std::size_t>(i)].pred;
    if (p.slot < 0 || p.slot >= kNumSlots || p.prop < 0 || p.prop >= kSlotProps) {
      throw ContractError("question predicate addresses an invalid state entry");
    }
    const double v = state[p.slot * kSlotProps + p.prop];
    const double margin = p.greater ? v - p.threshold : p.threshold - v;
    if (i == 0 || margin > best) {
      best = margin;
      pick = i;
    }
  }
  return pick;
}

Metrics compute_metrics(const std::vector<PairEval>& rows) {
  Metrics m;
  m.pairs = static_cast<long>(rows.size());
  if (rows.empty()) return m;
  double cf = 0, ccf = 0, both = 0, err = 0;
  for (const PairEval& r : rows) {
    cf += r.correct_f ? 1.0 : 0.0;
    ccf += r.correct_cf ? 1.0 : 0.0;
    both += (r.correct_f && r.correct_cf) ? 1.0 : 0.0;
    err += 0.5 * (r.mse_f + r.mse_cf);
  }
  const double n = static_cast<double>(rows.size());
  m.acc_f = cf / n;
  m.acc_cf = ccf / n;
  m.acc_overall = 0.5 * (m.acc_f + m.acc_cf);
  m.fspa = err / n;
  m.ccs = both / n;
  if (m.ccs > std::min(m.acc_f, m.acc_cf) + 1e-12) {
    throw ContractError("consistency score exceeded the smaller accuracy");
  }
  return m;
}

Metrics metrics_for_template(const std::vector<PairEval>& rows, const std::string& tpl) {
  std::vector<PairEval> sub;
  for (const PairEval& r : rows) {
    if (r.tpl == tpl) sub.push_back(r);
  }
  return compute_metrics(sub);
}

EvalOutput evaluate_pairs(const WorldModel& model, const std::vector<ScenarioPair>& pairs,
                          const EncodedSplit& rows) {
  if (pairs.empty()) throw ContractError("evaluate_pairs: empty split");
  if (rows.count() != static_cast<long>(pairs.size())) {
    throw ContractError("cached rows do not match the pair list");
  }
  const Tensor pred_f = model.predict(rows.h_f);
  const Tensor pred_cf = model.predict(rows.h_cf);

  EvalOutput out;
  out.rows.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const ScenarioPair& p = pairs[i];
    const double* pf = pred_f.data() + static_cast<std::size_t>(i) * kStateDim;
    const double* pcf = pred_cf.data() + static_cast<std::size_t>(i) * kStateDim;
    PairEval r;
    r.id = p.id;
    r.tpl = template_name(p.factual.template_id);
    r.mse_f = loss_pred_value({pf, kStateDim}, {p.state_f.data(), kStateDim});
    r.mse_cf = loss_pred_value({pcf, kStateDim}, {p.state_cf.data(), kStateDim});
    r.answer_f = answer_question(p.qa_f, pf);
    r.answer_cf = answer_question(p.qa_cf, pcf);
    r.correct_f = r.answer_f == p.qa_f.answer_index;
    r.correct_cf = r.answer_cf == p.qa_cf.answer_index;
    out.rows.push_back(std::move(r));
  }
  out.metrics = compute_metrics(out.rows);
  return out;
}

void write_eval_report(const std::string& dir, const RunConfig& cfg,
                       const std::string& split_name, const EvalOutput& out) {
  fs::create_directories(dir);
  static const char* kTemplates[4] = {"DROP", "RAMP", "COLLIDE1D", "PROJECTILE"};

  {
    ordered_json j;
    j["split"] = split_name;
    j["metrics"] = metrics_json(out.metrics);
    ordered_json per;
    for (const char* t : kTemplates) {
      const Metrics m = metrics_for_template(out.rows, t);
      if (m.pairs > 0) per[t] = metrics_json(m);
    }
    j["per_template"] = std::move(per);
    j["config"] = ordered_json::parse(to_json_string(cfg));
    std::ofstream f(fs::path(dir) / "report.json", std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write report.json under " + dir);
    f << j.dump(2) << "\n";
  }
  {
    std::ofstream f(fs::path(dir) / "report.csv", std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write report.csv under " + dir);
    f << "split,scope,pairs,acc_f,acc_cf,acc_overall,fspa,ccs\n";
    auto row = [&](const std::string& scope, const Metrics& m) {
      f << split_name << ',' << scope << ',' << m.pairs << ',' << fixed6(m.acc_f) << ','
        << fixed6(m.acc_cf) << ',' << fixed6(m.acc_overall) << ',' << fixed6(m.fspa) << ','
        << fixed6(m.ccs) << "\n";
    };
    row("all", out.metrics);
    for (const char* t : kTemplates) {
      const Metrics m = metrics_for_template(out.rows, t);
      if (m.pairs > 0) row(t, m);
    }
  }
  {
    std::ofstream f(fs::path(dir) / "report.txt", std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write report.txt under " + dir);
    char line[256];
    f << "evaluation split: " << split_name << "\n\n";
    std::snprintf(line, sizeof(line), "%-12s %6s %8s %8s %8s %10s %8s\n", "scope", "pairs",
                  "acc_f", "acc_cf", "acc", "fspa", "ccs");
    f << line;
    auto row = [&](const std::string& scope, const Metrics& m) {
      std::snprintf(line, sizeof(line), "%-12s %6ld %8s %8s %8s %10s %8s\n", scope.c_str(),
                    m.pairs, fixed4(m.acc_f).c_str(), fixed4(m.acc_cf).c_str(),
                    fixed4(m.acc_overall).c_str(), fixed6(m.fspa).c_str(),
                    fixed4(m.ccs).c_str());
      f << line;
    };
    row("all", out.metrics);
    for (const char* t : kTemplates) {
      const Metrics m = metrics_for_template(out.rows, t);
      if (m.pairs > 0) row(t, m);
    }
  }
  {
    std::ofstream f(fs::path(dir) / "pairs.jsonl", std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write pairs.jsonl under " + dir);
    for (const PairEval& r : out.rows) {
      ordered_json j;
      j["id"] = r.id;
      j["template"] = r.tpl;
      j["mse_f"] = r.mse_f;
      j["mse_cf"] = r.mse_cf;
      j["answer_f"] = r.answer_f;
      j["answer_cf"] = r.answer_cf;
      j["correct_f"] = r.correct_f;
      j["correct_cf"] = r.correct_cf;
      f << j.dump() << "\n";
    }
  }
}

}  // namespace cwmi
