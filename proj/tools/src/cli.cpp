#include "cord_cli/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cord/common/error.hpp"
#include "cord/eval/analysis.hpp"
#include "cord/eval/eval.hpp"
#include "cord/model/checkpoint.hpp"
#include "cord/train/config.hpp"
#include "cord/train/grad_audit.hpp"
#include "cord/train/trainer.hpp"

namespace cord::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--config", c.config, "key = value config file");
  auto* out = cmd->add_option("--out", c.out, "output directory (created if absent)");
  if (out_required) out->required();
  cmd->add_option("--override", c.overrides, "key=value, applied after the config file")
      ->take_all();
  cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
}

// defaults < config file < --override < dedicated flags
train::Config load_config(const Common& c, const std::vector<std::string>& flags) {
  train::Config cfg = c.config.empty() ? train::Config() : train::Config::from_file(c.config);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  for (const auto& f : flags) cfg.apply_override(f);
  return cfg;
}

fs::path prepare_out(const std::string& out, const train::Config& cfg) {
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + ec.message(), dir.string());
  cfg.write_resolved(dir / "config.resolved");
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot create file", path.string());
  f << text;
  if (!f) throw IoError("write failed", path.string());
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

train::Params load_params(const train::Settings& s, const std::string& path) {
  if (path.empty()) throw ConfigError("no checkpoint given (set paths.base or --checkpoint)");
  train::Params p = model::init_params<train::Real>(s.model);
  model::load_checkpoint(p, path);
  return p;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("bad value '" + item + "' in --values");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--values is empty");
  return out;
}

int run_generate(const Common& c, std::ostream& out) {
  const auto cfg = load_config(c, {});
  const auto s = train::resolve(cfg);
  const auto dir = prepare_out(c.out, cfg);
  const auto corpus = train::load_corpus(s);
  task::write_dataset(corpus.data, dir);
  task::write_aux(corpus.aux, dir);
  out << "generate-data: " << corpus.data.train.size() << "/" << corpus.data.val.size() << "/"
      << corpus.data.test.size() << " train/val/test pairs, " << corpus.aux.train.size() << "/"
      << corpus.aux.test.size() << " aux records -> " << dir.string() << "\n";
  return 0;
}

int run_pretrain(const Common& c, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(c, {});
  const auto s = train::resolve(cfg);
  const auto dir = prepare_out(c.out, cfg);
  const auto corpus = train::load_corpus(s);
  auto result = train::pretrain(s, corpus, &err);
  model::save_checkpoint(result.params, dir / "base.ckpt");
  std::string csv = "step,loss,grad_norm\n";
  char line[96];
  for (const auto& m : result.metrics) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g\n", m.step, m.loss, m.grad_norm);
    csv += line;
  }
  write_file(dir / "pretrain_metrics.csv", csv);
  const auto e = train::evaluate_point(s, corpus, result.params, 0, 0);
  write_file(dir / "base_eval.csv", train::eval_csv("base", std::span<const train::EvalPoint>(&e, 1)));
  out << "pretrain: text " << fmt2(e.text) << " audio " << fmt2(e.audio) << " aux " << fmt2(e.aux)
      << " gap " << fmt2(e.delta_base) << " -> " << (dir / "base.ckpt").string() << "\n";
  return 0;
}

int run_train(const Common& c, const std::string& method, std::optional<std::size_t> steps,
              std::ostream& out, std::ostream& err) {
  std::vector<std::string> flags;
  if (!method.empty()) flags.push_back("train.method=" + method);
  if (steps) flags.push_back("train.steps=" + std::to_string(*steps));
  const auto cfg = load_config(c, flags);
  const auto s = train::resolve(cfg);
  const auto dir = prepare_out(c.out, cfg);
  const auto corpus = train::load_corpus(s);
  const auto base = load_params(s, s.base_checkpoint);
  const auto r = train::run_experiment(s, corpus, base, dir, std::nullopt, &err);
  const auto& last = r.evals.back();
  out << "train " << r.arm << ": " << r.metrics.size() << " steps, audio "
      << fmt2(r.evals.front().audio) << " -> " << fmt2(last.audio) << ", gap "
      << fmt2(r.evals.front().delta_base) << " -> " << fmt2(last.delta_base) << " -> "
      << (dir / "metrics.csv").string() << "\n";
  return 0;
}

int run_eval(const Common& c, const std::string& checkpoint, std::ostream& out) {
  const auto cfg = load_config(c, {});
  const auto s = train::resolve(cfg);
  const auto dir = prepare_out(c.out, cfg);
  const auto corpus = train::load_corpus(s);
  const auto base = load_params(s, s.base_checkpoint);
  const auto b = train::evaluate_point(s, corpus, base, 0, 0);
  std::vector<train::EvalPoint> points{b};
  eval::MethodEval base_eval{"base", {{"arith", b.text, b.audio}}};
  std::vector<eval::MethodEval> methods;
  if (!checkpoint.empty()) {
    const auto p = load_params(s, checkpoint);
    auto e = train::evaluate_point(s, corpus, p, 1, b.text);
    points.push_back(e);
    methods.push_back({fs::path(checkpoint).stem().string(), {{"arith", e.text, e.audio}}});
  }
  const auto report = eval::gap_report(base_eval, methods);
  write_file(dir / "eval.csv", train::eval_csv("eval", points));
  write_file(dir / "gap_report.csv", report.to_csv());
  write_file(dir / "gap_report.txt", report.to_text());
  const auto& row = report.rows.back();
  out << "eval: base text " << fmt2(b.text) << ", " << row.method << " audio " << fmt2(row.audio[0])
      << " gap " << fmt2(row.average_delta) << " (" << fmt2(row.reduction_pct) << "% reduction)\n";
  return 0;
}

int run_analyze(const Common& c, const std::string& checkpoint, const std::string& dump,
                std::size_t bins, double q, double temperature, std::ostream& out) {
  const auto cfg = load_config(c, {});
  const auto s = train::resolve(cfg);
  const auto dir = prepare_out(c.out, cfg);
  std::vector<eval::KlRecord> records;
  if (!dump.empty()) {
    records = eval::records_from_dumps(eval::read_trajectories(dump));
  } else {
    const auto corpus = train::load_corpus(s);
    const auto params = load_params(s, checkpoint.empty() ? s.base_checkpoint : checkpoint);
    const auto& items = corpus.data.split(s.eval.split);
    const std::size_t n = s.eval.limit == 0 ? items.size() : std::min(s.eval.limit, items.size());
    records = eval::collect_kl_records(params, std::span<const task::ModalPair>(items.data(), n),
                                       temperature, s.eval.max_len,
                                       derive_seed(s.seed, Stream::kAnalysis));
    // regroup per trajectory for the dump
    std::vector<eval::TrajectoryDump> dumps;
    for (const auto& r : records) {
      if (r.position == 1) dumps.push_back({r.prompt_id, {}, {}, r.correct ? 1.0 : 0.0});
      dumps.back().tokens.push_back(r.token);
      dumps.back().divergences.push_back(r.divergence);
    }
    eval::write_trajectories(dumps, dir / "trajectories.jsonl");
  }
  if (records.empty()) throw ConfigError("analyze: no records");
  const auto h = eval::kl_histogram(records, bins, q);
  write_file(dir / "kl_histogram.csv", h.histogram.to_csv());
  const auto tf = eval::token_frequency_by_kl(records, q);
  std::string csv = "region,token,count\n";
  for (const auto& [tok, n] : tf.high) csv += "high," + std::to_string(tok) + ',' + std::to_string(n) + '\n';
  for (const auto& [tok, n] : tf.low) csv += "low," + std::to_string(tok) + ',' + std::to_string(n) + '\n';
  write_file(dir / "token_frequency.csv", csv);
  double r = 0;
  std::string r_text;
  try {
    r = eval::position_correlation(records);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", r);
    r_text = buf;
  } catch (const ConfigError&) {
    r_text = "undefined";
  }
  char summary[256];
  std::snprintf(summary, sizeof summary,
                "records %zu\nmean %.6g\nmedian %.6g\np%.0f %.6g\nright_skewed %s\npearson_t_d %s\n",
                records.size(), h.mean, h.median, q, h.threshold, h.mean > h.median ? "yes" : "no",
                r_text.c_str());
  write_file(dir / "analysis.txt", summary);
  out << "analyze: " << records.size() << " steps, mean D " << h.mean << ", median " << h.median
      << ", p" << q << " " << h.threshold << ", r(t, D) " << r_text << "\n";
  return 0;
}

int run_grad_check(const Common& c, std::size_t max_elements, std::ostream& out) {
  const auto cfg = load_config(c, {});
  const fs::path dir = c.out.empty() ? fs::path() : prepare_out(c.out, cfg);
  train::AuditOptions opt;
  opt.seed = cfg.get_u64("seed");
  opt.max_elements = max_elements;
  std::string report;
  bool ok = true;
  auto run = [&](const char* name, const std::vector<train::LossAudit>& audits, double tol) {
    for (const auto& a : audits) {
      const bool pass = a.report.passed(tol);
      ok = ok && pass;
      char line[160];
      std::snprintf(line, sizeof line, "%s %s %s max_rel %.3e (tol %.0e)\n", pass ? "PASS" : "FAIL",
                    name, a.loss.c_str(), a.report.max_rel_error, tol);
      out << line;
      report += line + a.report.to_string(tol);
    }
  };
  {
    auto o = opt;
    o.check = train::kF64Check;
    run("f64", train::audit_losses<double>(o), train::kF64Tolerance);
  }
  {
    auto o = opt;
    o.check = train::kF32Check;
    run("f32", train::audit_losses<float>(o), train::kF32Tolerance);
  }
  if (!dir.empty()) write_file(dir / "grad_check.txt", report);
  return ok ? 0 : 1;
}

int run_sweep(const Common& c, const std::string& param, const std::string& values,
              std::optional<std::size_t> steps, std::ostream& out, std::ostream& err) {
  if (param != "alpha_beta") throw ConfigError("sweep: unsupported --param '" + param + "'");
  std::vector<std::string> flags{"train.method=cord"};
  if (steps) flags.push_back("train.steps=" + std::to_string(*steps));
  auto cfg = load_config(c, flags);
  const auto s0 = train::resolve(cfg);
  const auto dir = prepare_out(c.out, cfg);
  const auto corpus = train::load_corpus(s0);
  const auto base = load_params(s0, s0.base_checkpoint);
  const auto base_point = train::evaluate_point(s0, corpus, base, 0, 0);
  std::vector<train::SweepPoint> points;
  for (double v : parse_values(values)) {
    auto arm_cfg = cfg;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    arm_cfg.set("align.alpha", buf);
    arm_cfg.set("align.beta", buf);
    const auto s = train::resolve(arm_cfg);
    const auto arm_dir = dir / (std::string("alpha_beta_") + buf);
    std::error_code ec;
    fs::create_directories(arm_dir, ec);
    arm_cfg.write_resolved(arm_dir / "config.resolved");
    const auto r = train::run_experiment(s, corpus, base, arm_dir, base_point, &err);
    points.push_back({v, r.evals.back(), 0.0});
  }
  train::finish_sweep(points);
  write_file(dir / "sweep.csv", train::sweep_csv(points));
  out << "sweep alpha_beta:";
  for (const auto& p : points) out << " " << p.value << "=" << fmt2(p.relative);
  out << " -> " << (dir / "sweep.csv").string() << "\n";
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"cord: cross-modal on-policy self-distillation experiments"};
  app.require_subcommand(1, 1);

  Common gen, pre, tr, ev, an, gc, sw;
  auto* cmd_gen = app.add_subcommand("generate-data", "write synthetic paired datasets");
  add_common(cmd_gen, gen);

  auto* cmd_pre = app.add_subcommand("pretrain", "train the base checkpoint (induces the gap)");
  add_common(cmd_pre, pre);

  std::string method;
  std::optional<std::size_t> steps, sweep_steps;
  auto* cmd_tr = app.add_subcommand("train", "run one alignment arm from paths.base");
  add_common(cmd_tr, tr);
  cmd_tr->add_option("--method", method, "cord | opd | grpo | sft | fkl");
  cmd_tr->add_option("--steps", steps, "optimizer steps");

  std::string checkpoint;
  auto* cmd_ev = app.add_subcommand("eval", "accuracy per modality and the gap report");
  add_common(cmd_ev, ev);
  cmd_ev->add_option("--checkpoint", checkpoint, "method checkpoint to compare with paths.base");

  std::string an_checkpoint, dump;
  std::size_t bins = 30;
  double q = 80, temperature = 1.0;
  auto* cmd_an = app.add_subcommand("analyze", "divergence statistics along audio rollouts");
  add_common(cmd_an, an);
  cmd_an->add_option("--checkpoint", an_checkpoint, "checkpoint (default: paths.base)");
  cmd_an->add_option("--dump", dump, "analyze an existing trajectories.jsonl instead");
  cmd_an->add_option("--bins", bins, "histogram bins")->check(CLI::PositiveNumber);
  cmd_an->add_option("--q", q, "percentile threshold")->check(CLI::Range(0.0, 100.0));
  cmd_an->add_option("--temperature", temperature, "rollout temperature")->check(CLI::PositiveNumber);

  std::size_t max_elements = 0;
  auto* cmd_gc = app.add_subcommand("grad-check", "finite-difference audit of the four losses");
  add_common(cmd_gc, gc, false);
  cmd_gc->add_option("--max-elements", max_elements, "elements per tensor (0: all)");

  std::string param = "alpha_beta", values = "1.0,1.5,2.0,2.5";
  auto* cmd_sw = app.add_subcommand("sweep", "cord arms over a weighting grid");
  add_common(cmd_sw, sw);
  cmd_sw->add_option("--param", param, "swept parameter (alpha_beta)");
  cmd_sw->add_option("--values", values, "comma-separated values");
  cmd_sw->add_option("--steps", sweep_steps, "optimizer steps per arm");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*cmd_gen) return run_generate(gen, out);
    if (*cmd_pre) return run_pretrain(pre, out, err);
    if (*cmd_tr) return run_train(tr, method, steps, out, err);
    if (*cmd_ev) return run_eval(ev, checkpoint, out);
    if (*cmd_an) return run_analyze(an, an_checkpoint, dump, bins, q, temperature, out);
    if (*cmd_gc) return run_grad_check(gc, max_elements, out);
    if (*cmd_sw) return run_sweep(sw, param, values, sweep_steps, out, err);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    err << "i/o failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace cord::cli
