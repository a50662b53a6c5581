#include "cord/eval/eval.hpp"

#include <cstdio>
#include <sstream>

#include "cord/align/seq_align.hpp"
#include "cord/common/error.hpp"
#include "cord/common/parallel.hpp"
#include "cord/model/decoder.hpp"
#include "cord/rollout/rollout.hpp"

namespace cord::eval {

template <typename Real>
double evaluate(const model::ModelParams<Real>& params, std::span<const task::ModalPair> items,
                model::Modality modality, std::size_t max_len, std::size_t limit) {
  const std::size_t n = limit == 0 ? items.size() : std::min(limit, items.size());
  if (n == 0) throw ConfigError("evaluate: empty dataset");
  std::vector<char> correct(n, 0);
  rollout::RolloutOptions opts;
  opts.greedy = true;
  opts.max_len = max_len;
  parallel_for(n, [&](std::size_t i) {
    const auto& pair = items[i];
    const model::Condition cond = modality == model::Modality::kText
                                      ? rollout::text_condition(pair)
                                      : rollout::audio_condition(pair);
    const auto traj = rollout::sample<Real>(params, cond, nullptr, opts);
    const auto answer = align::extract_answer(traj.tokens);
    correct[i] = answer && *answer == pair.instance.answer;
  });
  std::size_t hits = 0;
  for (char c : correct) hits += static_cast<std::size_t>(c);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

model::Condition aux_condition(const task::AuxInstance& item) {
  return {model::Modality::kAudio, item.x_audio, vocab::out::kAuxSep};
}

template <typename Real>
double evaluate_aux(const model::ModelParams<Real>& params,
                    std::span<const task::AuxInstance> items) {
  if (items.empty()) throw ConfigError("evaluate_aux: empty dataset");
  std::vector<char> correct(items.size(), 0);
  parallel_for(items.size(), [&](std::size_t i) {
    model::IncrementalDecoder<Real> dec(params, aux_condition(items[i]));
    correct[i] = rollout::argmax_token<Real>(dec.logits()) == task::label_token(items[i].label);
  });
  std::size_t hits = 0;
  for (char c : correct) hits += static_cast<std::size_t>(c);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(items.size());
}

double modality_gap(double base_text_accuracy, double method_audio_accuracy) {
  return base_text_accuracy - method_audio_accuracy;
}

double gap_reduction_pct(double base_average_delta, double method_average_delta) {
  if (base_average_delta == 0.0) throw ConfigError("gap reduction undefined for a zero base gap");
  return 100.0 * (base_average_delta - method_average_delta) / base_average_delta;
}

EvalReport gap_report(const MethodEval& base, std::span<const MethodEval> methods) {
  if (base.tasks.empty()) throw ConfigError("gap_report: missing base evaluation");
  EvalReport r;
  for (const auto& t : base.tasks) {
    r.tasks.push_back(t.task);
    r.base_text.push_back(t.text);
  }
  auto row_for = [&](const MethodEval& m) {
    if (m.tasks.size() != r.tasks.size()) {
      throw ConfigError("gap_report: method '" + m.method + "' has a different task list");
    }
    GapRow row;
    row.method = m.method;
    double total = 0;
    for (std::size_t i = 0; i < m.tasks.size(); ++i) {
      if (m.tasks[i].task != r.tasks[i]) {
        throw ConfigError("gap_report: task '" + m.tasks[i].task + "' does not match base task '" +
                          r.tasks[i] + "'");
      }
      row.audio.push_back(m.tasks[i].audio);
      row.delta.push_back(modality_gap(r.base_text[i], m.tasks[i].audio));
      total += row.delta.back();
    }
    row.average_delta = total / static_cast<double>(row.delta.size());
    return row;
  };
  r.rows.push_back(row_for(base));
  r.rows.back().reduction_pct = 0.0;
  const double base_delta = r.rows.front().average_delta;
  for (const auto& m : methods) {
    GapRow row = row_for(m);
    row.reduction_pct = base_delta == 0.0 ? 0.0 : gap_reduction_pct(base_delta, row.average_delta);
    r.rows.push_back(std::move(row));
  }
  return r;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "method";
  for (const auto& t : tasks) out << ',' << t << "_audio," << t << "_delta";
  out << ",avg_delta,reduction_pct\n";
  for (const auto& row : rows) {
    out << row.method;
    for (std::size_t i = 0; i < tasks.size(); ++i) out << ',' << fmt(row.audio[i]) << ',' << fmt(row.delta[i]);
    out << ',' << fmt(row.average_delta) << ',' << fmt(row.reduction_pct) << '\n';
  }
  return out.str();
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << "base text accuracy:";
  for (std::size_t i = 0; i < tasks.size(); ++i) out << ' ' << tasks[i] << '=' << fmt(base_text[i]);
  out << '\n';
  char line[256];
  std::snprintf(line, sizeof line, "%-12s", "method");
  out << line;
  for (const auto& t : tasks) {
    std::snprintf(line, sizeof line, " %10s %10s", (t + ":aud").c_str(), (t + ":gap").c_str());
    out << line;
  }
  out << "    avg_gap  reduction\n";
  for (const auto& row : rows) {
    std::snprintf(line, sizeof line, "%-12s", row.method.c_str());
    out << line;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      std::snprintf(line, sizeof line, " %10.2f %10.2f", row.audio[i], row.delta[i]);
      out << line;
    }
    std::snprintf(line, sizeof line, " %10.2f %9.1f%%\n", row.average_delta, row.reduction_pct);
    out << line;
  }
  return out.str();
}

template double evaluate<float>(const model::ModelParams<float>&, std::span<const task::ModalPair>,
                                model::Modality, std::size_t, std::size_t);
template double evaluate<double>(const model::ModelParams<double>&,
                                 std::span<const task::ModalPair>, model::Modality, std::size_t,
                                 std::size_t);
template double evaluate_aux<float>(const model::ModelParams<float>&,
                                    std::span<const task::AuxInstance>);
template double evaluate_aux<double>(const model::ModelParams<double>&,
                                     std::span<const task::AuxInstance>);

}  // namespace cord::eval
