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
//
// Verification backend: embedding extraction under the six trial conditions,
// cosine scoring, score-level fusion, EER, and report rendering.

#ifndef MVSV_EVAL_H_
#define MVSV_EVAL_H_

#include <string>
#include <utility>
#include <vector>

#include "mvsv/data.h"
#include "mvsv/model.h"

namespace mvsv {

// Scores of one system on one trial list; scores[i] belongs to trials[i].
// condition is a condition name for native sets and "FUSED" for fused ones.
struct ScoreSet {
  std::string system;
  std::string condition;
  std::vector<TrialPair> trials;
  std::vector<double> scores;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
  int num_target = 0;
  int num_nontarget = 0;
};

// Cosine similarity of two equal-length vectors, accumulated in double with
// norms floored at 1e-12 (zero/zero scores 0).
template <typename S>
double cosine(const Tensor<S>& a, const Tensor<S>& b);
double cosine(const std::vector<double>& a, const std::vector<double>& b);

// Which conditions a topology can score natively.
bool supports_condition(TopologyKind kind, Cond c);
// Human-readable requirement, for capability diagnostics.
std::string condition_requirement(Cond c);

// Scores one model on trials that all share one condition. Embedding
// extraction parallelizes over utterances; output order follows the trial
// list, so results are identical for any thread count.
ScoreSet score_condition(Model& model, const std::string& system, const Dataset& data,
                         const std::vector<TrialPair>& trials, int threads = 1);

// Scores every (system, condition) combination the topologies support, in
// system order, conditions in the fixed AA..V_AV order. A condition present
// in the trial list that no system supports is a capability error.
std::vector<ScoreSet> score_trials(const std::vector<std::pair<std::string, Model*>>& systems,
                                   const Dataset& data, const std::vector<TrialPair>& trials,
                                   int threads = 1);

// Per-trial weighted mean of aligned sets (equal weights when empty).
// Alignment (length, ids, labels) is enforced. The fused set keeps the first
// input's trial list, takes condition "FUSED" and joins system tags with '+'.
ScoreSet fuse_scores(const std::vector<ScoreSet>& sets,
                     const std::vector<double>& weights = {});

// Equal-error rate by threshold sweep over the pooled distinct scores with
// linear interpolation between adjacent operating points; exact crossings
// resolve to the lowest crossing threshold.
EerResult compute_eer(const std::vector<double>& targets, const std::vector<double>& nontargets);
EerResult compute_eer(const ScoreSet& set);

// One rendered report; CSV carries the same numbers as the text table.
struct ReportRow {
  std::string system;
  std::string condition;
  EerResult eer;
};
struct Report {
  std::string text;
  std::string csv;
};

// Sorts rows into the fixed condition order (AA, VV, AVAV, FUSED, AV_X,
// A_AV, V_AV), systems alphabetical within a condition; EER prints as
// percent with one decimal.
Report report_table(std::vector<ReportRow> rows);

// Score file: per line "condition TAB enrol TAB test TAB label TAB score",
// score with 9 significant digits. The condition column carries the set tag;
// a "FUSED" tag does not map back onto per-trial conditions on read.
void write_scores(const std::string& path, const ScoreSet& set);
ScoreSet read_scores(const std::string& path, const std::string& system);

}  // namespace mvsv

#endif  // MVSV_EVAL_H_
