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

#include "mvsv/eval.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mvsv/parallel.h"

namespace mvsv {

namespace {

constexpr double kNormFloor = 1e-12;

double cosine_raw(const double* a, const double* b, size_t n) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::max(std::sqrt(na), kNormFloor) * std::max(std::sqrt(nb), kNormFloor));
}

std::vector<double> to_doubles(const Tensor<float>& t) {
  std::vector<double> out(t.values().begin(), t.values().end());
  return out;
}

std::string fmt_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Fixed display order of the report's condition column.
int condition_rank(const std::string& c) {
  if (c == "AA") return 0;
  if (c == "VV") return 1;
  if (c == "AVAV") return 2;
  if (c == "FUSED") return 3;
  if (c == "AV_X") return 4;
  if (c == "A_AV") return 5;
  if (c == "V_AV") return 6;
  return 7;
}

}  // namespace

template <typename S>
double cosine(const Tensor<S>& a, const Tensor<S>& b) {
  a.require_rank(1, "cosine lhs");
  b.require_rank(1, "cosine rhs");
  if (a.dim(0) != b.dim(0))
    throw DimensionError("cosine: dim mismatch " + std::to_string(a.dim(0)) + " vs " +
                         std::to_string(b.dim(0)));
  double dot = 0.0, na = 0.0, nb = 0.0;
  const S* pa = a.values().data();
  const S* pb = b.values().data();
  for (int64_t i = 0; i < a.dim(0); ++i) {
    const double x = static_cast<double>(pa[i]);
    const double y = static_cast<double>(pb[i]);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  return dot / (std::max(std::sqrt(na), kNormFloor) * std::max(std::sqrt(nb), kNormFloor));
}

template double cosine<float>(const Tensor<float>&, const Tensor<float>&);
template double cosine<double>(const Tensor<double>&, const Tensor<double>&);

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw DimensionError("cosine: dim mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  return cosine_raw(a.data(), b.data(), a.size());
}

bool supports_condition(TopologyKind kind, Cond c) {
  switch (c) {
    case Cond::kAA: return has_audio_branch(kind);
    case Cond::kVV: return has_video_branch(kind);
    case Cond::kAVAV: return kind == TopologyKind::kMidFusion;
    case Cond::kAVX:
    case Cond::kAAV:
    case Cond::kVAV: return kind == TopologyKind::kMultiView;
  }
  return false;
}

std::string condition_requirement(Cond c) {
  switch (c) {
    case Cond::kAA: return "a topology with an audio branch";
    case Cond::kVV: return "a topology with a video branch";
    case Cond::kAVAV: return "the midfusion topology (joint embeddings)";
    case Cond::kAVX:
    case Cond::kAAV:
    case Cond::kVAV: return "the multiview topology (shared embedding space)";
  }
  return "";
}

namespace {

// Per-utterance embeddings a condition needs from each trial side.
struct Needs {
  bool enrol_audio = false, enrol_video = false;
  bool test_audio = false, test_video = false;
};

Needs condition_needs(Cond c) {
  Needs n;
  switch (c) {
    case Cond::kAA: n.enrol_audio = n.test_audio = true; break;
    case Cond::kVV: n.enrol_video = n.test_video = true; break;
    case Cond::kAVAV:
      n.enrol_audio = n.enrol_video = n.test_audio = n.test_video = true;
      break;
    case Cond::kAVX: n.enrol_audio = n.test_video = true; break;
    case Cond::kAAV:
      n.enrol_audio = n.test_audio = n.test_video = true;
      break;
    case Cond::kVAV:
      n.enrol_video = n.test_audio = n.test_video = true;
      break;
  }
  return n;
}

std::vector<double> mean_of(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw DimensionError("embedding mean: dim mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  std::vector<double> m(a.size());
  for (size_t i = 0; i < a.size(); ++i) m[i] = 0.5 * (a[i] + b[i]);
  return m;
}

std::vector<double> concat_of(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> j;
  j.reserve(a.size() + b.size());
  j.insert(j.end(), a.begin(), a.end());
  j.insert(j.end(), b.begin(), b.end());
  return j;
}

}  // namespace

ScoreSet score_condition(Model& model, const std::string& system, const Dataset& data,
                         const std::vector<TrialPair>& trials, int threads) {
  if (trials.empty()) throw DataError("score_condition: empty trial list");
  const Cond cond = trials.front().condition;
  for (const auto& t : trials)
    if (t.condition != cond)
      throw DataError("score_condition: mixed conditions in one trial list");
  if (!supports_condition(model.topology.kind, cond))
    throw CapabilityError("condition " + cond_name(cond) + " requires " +
                          condition_requirement(cond) + "; system '" + system + "' is " +
                          topology_name(model.topology.kind));

  // Collect the utterance/modality pairs that actually need embedding.
  const Needs needs = condition_needs(cond);
  std::set<int> want_audio, want_video;
  for (const auto& t : trials) {
    if (needs.enrol_audio) want_audio.insert(t.enrol_id);
    if (needs.enrol_video) want_video.insert(t.enrol_id);
    if (needs.test_audio) want_audio.insert(t.test_id);
    if (needs.test_video) want_video.insert(t.test_id);
  }

  struct Task {
    int utt = 0;
    Modality mod = Modality::kAudio;
  };
  std::vector<Task> tasks;
  tasks.reserve(want_audio.size() + want_video.size());
  for (int id : want_audio) tasks.push_back({id, Modality::kAudio});
  for (int id : want_video) tasks.push_back({id, Modality::kVideo});

  const Mode saved = model.mode;
  model.mode = Mode::kInfer;
  std::vector<std::vector<double>> slots(tasks.size());
  parallel_for(tasks.size(), threads, [&](size_t i) {
    const Task& tk = tasks[i];
    slots[i] = to_doubles(embed(model, data.by_id(tk.utt), tk.mod));
  });
  model.mode = saved;

  std::map<int, const std::vector<double>*> audio_emb, video_emb;
  for (size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].mod == Modality::kAudio)
      audio_emb[tasks[i].utt] = &slots[i];
    else
      video_emb[tasks[i].utt] = &slots[i];
  }

  ScoreSet out;
  out.system = system;
  out.condition = cond_name(cond);
  out.trials = trials;
  out.scores.reserve(trials.size());
  for (const auto& t : trials) {
    double s = 0.0;
    switch (cond) {
      case Cond::kAA:
        s = cosine_raw(audio_emb.at(t.enrol_id)->data(), audio_emb.at(t.test_id)->data(),
                       audio_emb.at(t.enrol_id)->size());
        break;
      case Cond::kVV:
        s = cosine_raw(video_emb.at(t.enrol_id)->data(), video_emb.at(t.test_id)->data(),
                       video_emb.at(t.enrol_id)->size());
        break;
      case Cond::kAVAV: {
        const std::vector<double> e = concat_of(*audio_emb.at(t.enrol_id), *video_emb.at(t.enrol_id));
        const std::vector<double> x = concat_of(*audio_emb.at(t.test_id), *video_emb.at(t.test_id));
        s = cosine(e, x);
        break;
      }
      case Cond::kAVX:
        s = cosine(*audio_emb.at(t.enrol_id), *video_emb.at(t.test_id));
        break;
      case Cond::kAAV:
        s = cosine(*audio_emb.at(t.enrol_id),
                   mean_of(*audio_emb.at(t.test_id), *video_emb.at(t.test_id)));
        break;
      case Cond::kVAV:
        s = cosine(*video_emb.at(t.enrol_id),
                   mean_of(*audio_emb.at(t.test_id), *video_emb.at(t.test_id)));
        break;
    }
    out.scores.push_back(s);
  }
  return out;
}

std::vector<ScoreSet> score_trials(const std::vector<std::pair<std::string, Model*>>& systems,
                                   const Dataset& data, const std::vector<TrialPair>& trials,
                                   int threads) {
  if (systems.empty()) throw ConfigError("score_trials: no systems given");

  std::map<Cond, std::vector<TrialPair>> by_cond;
  for (const auto& t : trials) by_cond[t.condition].push_back(t);

  // Every requested condition must be coverable by at least one system.
  for (const auto& [cond, list] : by_cond) {
    bool covered = false;
    for (const auto& [tag, model] : systems)
      covered = covered || supports_condition(model->topology.kind, cond);
    if (!covered)
      throw CapabilityError("condition " + cond_name(cond) + " requires " +
                            condition_requirement(cond) + "; no given system qualifies");
  }

  std::vector<ScoreSet> out;
  for (const auto& [tag, model] : systems)
    for (Cond cond : all_conditions()) {
      auto it = by_cond.find(cond);
      if (it == by_cond.end()) continue;
      if (!supports_condition(model->topology.kind, cond)) continue;
      out.push_back(score_condition(*model, tag, data, it->second, threads));
    }
  return out;
}

ScoreSet fuse_scores(const std::vector<ScoreSet>& sets, const std::vector<double>& weights) {
  if (sets.empty()) throw ConfigError("fuse_scores: no score sets");
  if (!weights.empty() && weights.size() != sets.size())
    throw ConfigError("fuse_scores: " + std::to_string(weights.size()) + " weights for " +
                      std::to_string(sets.size()) + " sets");
  double wsum = 0.0;
  for (size_t i = 0; i < sets.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w < 0.0) throw ConfigError("fuse_scores: negative weight");
    wsum += w;
  }
  if (wsum <= 0.0) throw ConfigError("fuse_scores: weights sum to zero");

  const ScoreSet& first = sets.front();
  for (const auto& s : sets) {
    if (s.scores.size() != s.trials.size())
      throw DataError("fuse_scores: scores/trials length mismatch in set " + s.system);
    if (s.trials.size() != first.trials.size())
      throw DataError("fuse_scores: sets have different trial counts");
    for (size_t i = 0; i < s.trials.size(); ++i) {
      const TrialPair& a = first.trials[i];
      const TrialPair& b = s.trials[i];
      if (a.enrol_id != b.enrol_id || a.test_id != b.test_id || a.target != b.target)
        throw DataError("fuse_scores: trial " + std::to_string(i) + " misaligned across sets");
    }
  }

  ScoreSet out;
  out.condition = "FUSED";
  out.trials = first.trials;
  out.scores.assign(first.scores.size(), 0.0);
  std::string sys;
  for (size_t k = 0; k < sets.size(); ++k) {
    const double w = (weights.empty() ? 1.0 : weights[k]) / wsum;
    for (size_t i = 0; i < out.scores.size(); ++i) out.scores[i] += w * sets[k].scores[i];
    if (k) sys += '+';
    sys += sets[k].system;
  }
  out.system = sys;
  return out;
}

EerResult compute_eer(const std::vector<double>& targets, const std::vector<double>& nontargets) {
  if (targets.empty() || nontargets.empty())
    throw DataError("compute_eer: need at least one target and one nontarget score");
  for (double s : targets)
    if (!std::isfinite(s)) throw NumericalError("compute_eer: non-finite target score");
  for (double s : nontargets)
    if (!std::isfinite(s)) throw NumericalError("compute_eer: non-finite nontarget score");

  std::vector<double> thr;
  thr.reserve(targets.size() + nontargets.size() + 1);
  thr.insert(thr.end(), targets.begin(), targets.end());
  thr.insert(thr.end(), nontargets.begin(), nontargets.end());
  std::sort(thr.begin(), thr.end());
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
  thr.push_back(thr.back() + 1.0);  // sentinel where FRR=1, FAR=0

  const double tn = static_cast<double>(targets.size());
  const double nn = static_cast<double>(nontargets.size());
  auto rates = [&](double t) {
    int fr = 0, fa = 0;
    for (double s : targets) fr += s < t;
    for (double s : nontargets) fa += s >= t;
    return std::pair<double, double>(fr / tn, fa / nn);
  };

  EerResult res;
  res.num_target = static_cast<int>(targets.size());
  res.num_nontarget = static_cast<int>(nontargets.size());

  double frr_p = 0.0, far_p = 1.0, t_p = thr.front();
  bool have_prev = false;
  for (double t : thr) {
    auto [frr, far] = rates(t);
    if (frr == far) {  // exact crossing; thresholds ascend so this is the lowest one
      res.eer = frr;
      res.threshold = t;
      return res;
    }
    if (frr > far) {
      if (!have_prev) {  // crossing sits below the first threshold; clamp
        res.eer = 0.5 * (frr + far);
        res.threshold = t;
        return res;
      }
      // Linear interpolation between the operating points around the crossing.
      const double d_prev = far_p - frr_p;
      const double d_cur = frr - far;
      const double alpha = d_prev / (d_prev + d_cur);
      res.eer = frr_p + alpha * (frr - frr_p);
      res.threshold = t_p + alpha * (t - t_p);
      return res;
    }
    frr_p = frr;
    far_p = far;
    t_p = t;
    have_prev = true;
  }
  // Unreachable: the sentinel threshold has FRR=1 >= FAR=0.
  res.eer = 0.5;
  res.threshold = thr.back();
  return res;
}

EerResult compute_eer(const ScoreSet& set) {
  if (set.scores.size() != set.trials.size())
    throw DataError("compute_eer: scores/trials length mismatch");
  std::vector<double> tar, non;
  for (size_t i = 0; i < set.scores.size(); ++i)
    (set.trials[i].target ? tar : non).push_back(set.scores[i]);
  return compute_eer(tar, non);
}

Report report_table(std::vector<ReportRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    const int ra = condition_rank(a.condition), rb = condition_rank(b.condition);
    if (ra != rb) return ra < rb;
    return a.system < b.system;
  });

  std::vector<std::array<std::string, 3>> cells;
  cells.push_back({"system", "condition", "eer_pct"});
  for (const auto& r : rows) {
    char pct[32];
    std::snprintf(pct, sizeof(pct), "%.1f", r.eer.eer * 100.0);
    cells.push_back({r.system, r.condition, pct});
  }

  size_t w0 = 0, w1 = 0;
  for (const auto& c : cells) {
    w0 = std::max(w0, c[0].size());
    w1 = std::max(w1, c[1].size());
  }
  std::ostringstream text, csv;
  for (size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    text << c[0] << std::string(w0 - c[0].size() + 2, ' ') << c[1]
         << std::string(w1 - c[1].size() + 2, ' ') << c[2] << '\n';
    csv << c[0] << ',' << c[1] << ',' << c[2] << '\n';
  }
  return {text.str(), csv.str()};
}

void write_scores(const std::string& path, const ScoreSet& set) {
  if (set.scores.size() != set.trials.size())
    throw DataError("write_scores: scores/trials length mismatch");
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open score file for writing: " + path);
  for (size_t i = 0; i < set.trials.size(); ++i) {
    const TrialPair& t = set.trials[i];
    f << set.condition << '\t' << t.enrol_id << '\t' << t.test_id << '\t' << (t.target ? 1 : 0)
      << '\t' << fmt_g9(set.scores[i]) << '\n';
  }
  if (!f) throw DataError("failed writing score file: " + path);
}

ScoreSet read_scores(const std::string& path, const std::string& system) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open score file: " + path);
  ScoreSet set;
  set.system = system;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 5)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 5 tab-separated fields");
    if (set.condition.empty())
      set.condition = cols[0];
    else if (set.condition != cols[0])
      throw DataError(path + ":" + std::to_string(lineno) + ": mixed condition tags in one file");
    TrialPair t;
    try {
      t.enrol_id = std::stoi(cols[1]);
      t.test_id = std::stoi(cols[2]);
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(lineno) + ": bad utterance id");
    }
    if (cols[3] != "0" && cols[3] != "1")
      throw DataError(path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
    t.target = cols[3] == "1";
    if (set.condition != "FUSED") t.condition = cond_from(set.condition);
    char* end = nullptr;
    const double score = std::strtod(cols[4].c_str(), &end);
    if (end == cols[4].c_str() || *end != '\0')
      throw DataError(path + ":" + std::to_string(lineno) + ": bad score value");
    set.trials.push_back(t);
    set.scores.push_back(score);
  }
  return set;
}

}  // namespace mvsv
