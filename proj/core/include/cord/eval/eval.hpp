#pragma once

#include <span>
#include <string>
#include <vector>

#include "cord/model/params.hpp"
#include "cord/task/dataset.hpp"

namespace cord::eval {

// Greedy decoding; percentage of items whose extracted answer equals the
// ground truth. limit = 0 evaluates every item.
template <typename Real>
double evaluate(const model::ModelParams<Real>& params, std::span<const task::ModalPair> items,
                model::Modality modality, std::size_t max_len = 200, std::size_t limit = 0);

// Percentage of auxiliary utterances whose first greedy output token is the
// correct noise-level label.
template <typename Real>
double evaluate_aux(const model::ModelParams<Real>& params,
                    std::span<const task::AuxInstance> items);

model::Condition aux_condition(const task::AuxInstance& item);

struct TaskAccuracy {
  std::string task;
  double text = 0;
  double audio = 0;
};

struct MethodEval {
  std::string method;
  std::vector<TaskAccuracy> tasks;  // same task order as the base evaluation
};

struct GapRow {
  std::string method;
  std::vector<double> audio;  // per task
  std::vector<double> delta;  // Acc_text^Base - Acc_audio^Method, per task
  double average_delta = 0;
  double reduction_pct = 0;   // relative to the base row's average delta
};

struct EvalReport {
  std::vector<std::string> tasks;
  std::vector<double> base_text;
  std::vector<GapRow> rows;  // first row is the base model itself

  std::string to_csv() const;
  std::string to_text() const;
};

double modality_gap(double base_text_accuracy, double method_audio_accuracy);
// 100 * (base - method) / base; throws ConfigError when base is 0.
double gap_reduction_pct(double base_average_delta, double method_average_delta);

// Throws ConfigError when the base evaluation has no tasks or a method's
// task list does not match.
EvalReport gap_report(const MethodEval& base, std::span<const MethodEval> methods);

}  // namespace cord::eval
