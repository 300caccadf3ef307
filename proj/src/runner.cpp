// Copyright (c) 2026 mvsv authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mvsv/runner.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <set>

#include "mvsv/eval.h"
#include "mvsv/io.h"
#include "mvsv/trainer.h"

namespace mvsv {

namespace {

namespace fs = std::filesystem;

void ensure_parent_dir(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path() && !p.parent_path().empty()) fs::create_directories(p.parent_path());
}

std::vector<AVSample> gather(const Dataset& ds, const std::vector<int>& ids) {
  std::vector<AVSample> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(ds.by_id(id));
  return out;
}

std::vector<UttRecord> gather_records(const DatasetManifest& m, const std::vector<int>& ids) {
  std::vector<UttRecord> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(m.utts.at(static_cast<size_t>(id)));
  return out;
}

// Held-out trial pairs for every condition, all retagged from one base draw
// so per-condition score sets stay index-aligned for fusion.
std::vector<TrialPair> default_trials(const Dataset& ds, uint64_t seed) {
  auto [train_ids, val_ids] = split_train_val(ds.manifest);
  const std::vector<UttRecord> test = gather_records(ds.manifest, val_ids);
  const std::vector<TrialPair> base = sample_trials(test, seed, Cond::kAA);
  std::vector<TrialPair> out;
  out.reserve(base.size() * all_conditions().size());
  for (Cond c : all_conditions()) {
    const std::vector<TrialPair> block = retag_trials(base, c);
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

std::string native_condition_tag(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::kUnimodalA: return "AA";
    case TopologyKind::kUnimodalV: return "VV";
    case TopologyKind::kMidFusion: return "AVAV";
    case TopologyKind::kMultiView: return "";  // ambiguous; recipes must say
  }
  return "";
}

}  // namespace

RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides, int threads_flag) {
  RunConfig cfg;
  if (!config_path.empty()) apply_config_text(cfg, read_file(config_path), config_path);
  for (const std::string& s : overrides) apply_config_override(cfg, s);
  if (threads_flag > 0) {
    cfg.threads = threads_flag;
    cfg.explicit_keys.insert("run.threads");
  }
  finalize_config(cfg);
  return cfg;
}

void cmd_gen_data(const GenDataArgs& args, std::ostream& out) {
  RunConfig cfg = load_run_config(args.config_path, args.overrides, args.threads);
  const std::string path = args.out.empty() ? cfg.dataset_path : args.out;

  Dataset ds = gen_synthetic(cfg.synth, cfg.threads);
  ensure_parent_dir(path);
  save_dataset(path, ds);
  out << "dataset " << path << ": " << ds.manifest.num_speakers << " speakers, "
      << ds.manifest.utts.size() << " utterances\n";

  if (!args.trials_out.empty()) {
    const std::vector<TrialPair> trials = default_trials(ds, cfg.trials_seed);
    ensure_parent_dir(args.trials_out);
    write_trials(args.trials_out, trials);
    out << "trials " << args.trials_out << ": " << trials.size() << " pairs across "
        << all_conditions().size() << " conditions\n";
  }
}

void cmd_train(const TrainArgs& args, std::ostream& out) {
  if (args.out.empty()) throw ConfigError("train: --out checkpoint path is required");
  RunConfig cfg = load_run_config(args.config_path, args.overrides, args.threads);
  const std::string data_path = args.data.empty() ? cfg.dataset_path : args.data;
  Dataset ds = load_dataset(data_path);

  Model model;
  TrainState state;
  std::string echo;
  if (args.resume.empty()) {
    if (args.topology.empty())
      throw ConfigError("train: --topology is required (unimodal-a, unimodal-v, midfusion, multiview)");
    const TopologyKind kind = topology_from(args.topology);
    const int num_classes = cfg.num_classes > 0 ? cfg.num_classes : ds.manifest.num_speakers;
    cfg.num_classes = num_classes;
    model = model_from_config(cfg, kind, num_classes);
    // Echo the resolved batchnorm choice so rebuilding a multiview model from
    // the checkpoint doesn't look like an explicitly forced (conflicting) flag.
    cfg.batchnorm = model.topology.head.use_batchnorm;
    echo = config_to_text(cfg);
  } else {
    // Resume: the checkpoint echo dictates the model; the current config
    // still drives the schedule (so max_epochs can be extended).
    CheckpointHeader header = read_checkpoint_header(args.resume);
    if (!args.topology.empty() && topology_from(args.topology) != topology_from(header.topology_tag))
      throw ConfigError("train: --topology " + args.topology + " conflicts with checkpoint topology " +
                        header.topology_tag);
    RunConfig mcfg;
    apply_config_text(mcfg, header.config_echo, args.resume + " (config echo)");
    finalize_config(mcfg);
    model = model_from_config(mcfg, topology_from(header.topology_tag), mcfg.num_classes);
    state = load_checkpoint(args.resume, model).state;
    cfg.num_classes = mcfg.num_classes;
    echo = header.config_echo;
  }

  auto [train_ids, val_ids] = split_train_val(ds.manifest);
  const std::vector<AVSample> train_set = gather(ds, train_ids);
  const std::vector<AVSample> val_set = gather(ds, val_ids);

  const std::string log_path = args.log.empty() ? args.out + ".log" : args.log;
  ensure_parent_dir(args.out);
  ensure_parent_dir(log_path);

  const TrainConfig tc = train_config_from(cfg);
  TrainResult res = train(model, train_set, val_set, tc, state, log_path);
  save_checkpoint(args.out, model, res.state, echo);

  out << "trained " << topology_name(model.topology.kind) << " for " << res.state.epoch
      << " epochs (" << train_set.size() << " train / " << val_set.size() << " val utterances)\n";
  if (!res.log.empty()) {
    const EpochLog& last = res.log.back();
    char line[160];
    std::snprintf(line, sizeof(line), "final: train_loss %.6f  val_loss %.6f  lr %.6g\n",
                  last.train_loss, last.val_loss, last.lr);
    out << line;
  }
  out << "checkpoint " << args.out << "\nlog " << log_path << "\n";
}

Model model_from_checkpoint(const std::string& path) {
  CheckpointHeader header = read_checkpoint_header(path);
  RunConfig cfg;
  apply_config_text(cfg, header.config_echo, path + " (config echo)");
  finalize_config(cfg);
  if (cfg.num_classes <= 0)
    throw DataError("checkpoint echo in " + path + " lacks a positive model.num_classes");
  Model model = model_from_config(cfg, topology_from(header.topology_tag), cfg.num_classes);
  load_checkpoint(path, model);
  model.mode = Mode::kInfer;
  return model;
}

void cmd_eval(const EvalArgs& args, std::ostream& out) {
  RunConfig cfg = load_run_config(args.config_path, args.overrides, args.threads);
  if (args.checkpoints.empty()) throw ConfigError("eval: at least one --checkpoints tag=path is required");
  const std::string data_path = args.data.empty() ? cfg.dataset_path : args.data;
  Dataset ds = load_dataset(data_path);

  // Named systems, in flag order.
  std::vector<std::pair<std::string, std::unique_ptr<Model>>> owned;
  std::set<std::string> tags;
  for (const std::string& spec_str : args.checkpoints) {
    const size_t eq = spec_str.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec_str.size())
      throw ConfigError("eval: --checkpoints expects tag=path, got '" + spec_str + "'");
    const std::string tag = spec_str.substr(0, eq);
    const std::string path = spec_str.substr(eq + 1);
    if (!tags.insert(tag).second) throw ConfigError("eval: duplicate checkpoint tag '" + tag + "'");
    owned.emplace_back(tag, std::make_unique<Model>(model_from_checkpoint(path)));
  }
  std::vector<std::pair<std::string, Model*>> systems;
  for (auto& [tag, model] : owned) systems.emplace_back(tag, model.get());

  // Trial list: explicit file or a fresh draw over the held-out split.
  std::vector<TrialPair> all_trials =
      args.trials.empty() ? default_trials(ds, cfg.trials_seed) : read_trials(args.trials);

  // Requested conditions: flags beat config; empty means "whatever the given
  // systems can score".
  std::vector<Cond> requested;
  if (!args.conditions.empty())
    for (const std::string& c : args.conditions) requested.push_back(cond_from(c));
  else
    requested = cfg.conditions;
  if (requested.empty()) {
    std::set<Cond> present;
    for (const TrialPair& t : all_trials) present.insert(t.condition);
    for (Cond c : all_conditions()) {
      if (!present.count(c)) continue;
      for (const auto& [tag, model] : systems)
        if (supports_condition(model->topology.kind, c)) {
          requested.push_back(c);
          break;
        }
    }
    if (requested.empty())
      throw CapabilityError("eval: no trial condition is scorable by the given checkpoints");
  }

  std::vector<TrialPair> selected;
  for (Cond c : requested) {
    size_t before = selected.size();
    for (const TrialPair& t : all_trials)
      if (t.condition == c) selected.push_back(t);
    if (selected.size() == before)
      throw DataError("eval: no " + cond_name(c) + " trials available");
  }

  std::vector<ScoreSet> sets = score_trials(systems, ds, selected, cfg.threads);

  const std::string scores_dir = args.scores_dir.empty() ? cfg.scores_dir : args.scores_dir;
  fs::create_directories(scores_dir);
  std::vector<ReportRow> rows;
  auto emit = [&](const ScoreSet& s) {
    const std::string file = scores_dir + "/" + s.system + "_" + s.condition + ".scores";
    write_scores(file, s);
    rows.push_back({s.system, s.condition, compute_eer(s)});
    out << "scores " << file << " (" << s.scores.size() << " trials)\n";
  };
  for (const ScoreSet& s : sets) emit(s);

  // Fusion recipes: elements are tags with an optional .CONDITION suffix;
  // without one, the system's native condition is used.
  std::vector<std::string> recipes = args.fuse.empty() ? cfg.fusions : args.fuse;
  for (const std::string& recipe : recipes) {
    std::vector<ScoreSet> parts;
    size_t start = 0;
    while (start <= recipe.size()) {
      size_t plus = recipe.find('+', start);
      const std::string element =
          recipe.substr(start, plus == std::string::npos ? plus : plus - start);
      if (element.empty()) throw ConfigError("eval: bad fusion recipe '" + recipe + "'");
      std::string tag = element, cond_tag;
      if (const size_t dot = element.find('.'); dot != std::string::npos) {
        tag = element.substr(0, dot);
        cond_tag = element.substr(dot + 1);
      }
      const Model* model = nullptr;
      for (const auto& [t, m] : systems)
        if (t == tag) model = m;
      if (!model) throw ConfigError("eval: fusion recipe '" + recipe + "' names unknown system '" + tag + "'");
      if (cond_tag.empty()) {
        cond_tag = native_condition_tag(model->topology.kind);
        if (cond_tag.empty())
          throw ConfigError("eval: multiview system '" + tag +
                            "' needs an explicit condition in fusion recipes (e.g. " + tag + ".AA)");
      }
      const ScoreSet* found = nullptr;
      for (const ScoreSet& s : sets)
        if (s.system == tag && s.condition == cond_tag) found = &s;
      if (!found)
        throw ConfigError("eval: fusion recipe '" + recipe + "' needs scores for " + tag + "/" +
                          cond_tag + "; add the condition to --conditions");
      parts.push_back(*found);
      if (plus == std::string::npos) break;
      start = plus + 1;
    }
    if (parts.size() < 2)
      throw ConfigError("eval: fusion recipe '" + recipe + "' needs at least two systems");
    emit(fuse_scores(parts));
  }

  Report report = report_table(rows);
  const std::string report_path = args.report.empty() ? cfg.report_path : args.report;
  ensure_parent_dir(report_path);
  write_file(report_path + ".txt", report.text);
  write_file(report_path + ".csv", report.csv);
  out << "report " << report_path << ".txt\n" << report.text;
}

void cmd_verify(const VerifyArgs& args, std::ostream& out) {
  if (args.checkpoint.empty()) throw ConfigError("verify: --checkpoint is required");
  if (args.data.empty()) throw ConfigError("verify: --data is required");
  if (args.enrol_id < 0 || args.test_id < 0)
    throw ConfigError("verify: --enrol and --test utterance ids are required");

  Model model = model_from_checkpoint(args.checkpoint);
  Dataset ds = load_dataset(args.data);
  const Cond cond = cond_from(args.condition);

  // A single pair; enrol == test is allowed here (self-verification probe).
  const TrialPair pair{false, args.enrol_id, args.test_id, cond};
  const ScoreSet set = score_condition(model, "verify", ds, {pair}, 1);
  const double score = set.scores.front();
  const bool accept = score >= args.threshold;

  char line[160];
  std::snprintf(line, sizeof(line), "%s enrol=%d test=%d score=%.9g threshold=%.9g %s\n",
                cond_name(cond).c_str(), args.enrol_id, args.test_id, score, args.threshold,
                accept ? "accept" : "reject");
  out << line;
}

}  // namespace mvsv
