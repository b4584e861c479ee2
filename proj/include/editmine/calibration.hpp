/*
 * Copyright 2026 The editmine Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Human-rating calibration and validator evaluation metrics.
//
// Rater bias is a rater's mean score minus the mean of the per-triplet
// averages over the triplets that rater scored. The consensus score of a
// triplet is the mean of its bias-corrected ratings. Both are single pass and
// computed separately per axis.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace editmine {

enum class Axis { Instruction, Aesthetics };

std::string to_string(Axis a);
Axis axis_from_string(const std::string& s);

struct RaterScore {
  std::string triplet_id;
  std::string rater_id;
  Axis axis = Axis::Instruction;
  double value = 0;
};

struct RaterBias {
  std::string rater_id;
  Axis axis = Axis::Instruction;
  double bias = 0;
};

struct TripletConsensus {
  std::string triplet_id;
  Axis axis = Axis::Instruction;
  double score = 0;
};

/// Throws ValidationError on a duplicate (triplet, rater, axis), an empty id
/// or a value outside [1, 5].
void validate_scores(const std::vector<RaterScore>& scores);

/// Biases of every rater with at least one score on `axis`, sorted by rater id.
std::vector<RaterBias> rater_bias(const std::vector<RaterScore>& scores, Axis axis);

/// Bias-corrected mean per triplet on `axis`, sorted by triplet id. Raters
/// without an entry in `biases` are taken as unbiased.
std::vector<TripletConsensus> consensus(const std::vector<RaterScore>& scores, const std::vector<RaterBias>& biases,
                                        Axis axis);

/// Mean absolute error. Throws std::invalid_argument on empty or unequal input.
double mae(const std::vector<double>& pred, const std::vector<double>& truth);

/// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(const std::vector<double>& v);

/// Spearman's rho as the Pearson correlation of average ranks. NaN when
/// either vector is constant. Throws std::invalid_argument when sizes differ
/// or fewer than two elements are given.
double spearman(const std::vector<double>& pred, const std::vector<double>& truth);

struct Reliability {
  double mean = 0;
  double stddev = 0;  // population standard deviation over rater pairs
  std::size_t pairs = 0;
};

/// Spearman over every rater pair sharing at least two triplets on `axis`.
/// Pairs whose correlation is undefined are skipped. mean is NaN when no pair
/// qualifies.
Reliability inter_rater_reliability(const std::vector<RaterScore>& scores, Axis axis);

/// Default bucket edges: [1,2) [2,3) [3,4) [4,4.5) [4.5,4.7) [4.7,5.0].
std::vector<double> default_bucket_edges();

/// Index of the bucket holding v. The last bucket is closed; values outside
/// [edges.front(), edges.back()] give nullopt.
std::optional<std::size_t> bucket_index(double v, const std::vector<double>& edges);

std::string bucket_label(std::size_t i, const std::vector<double>& edges);

struct BucketError {
  std::string label;
  std::size_t count = 0;
  double mae = 0;  // NaN for empty buckets
};

/// MAE per ground-truth bucket.
std::vector<BucketError> bucketed_mae(const std::vector<double>& pred, const std::vector<double>& truth,
                                      const std::vector<double>& edges);

/// counts[t][p]: rows are ground-truth buckets, columns predicted buckets.
std::vector<std::vector<std::int64_t>> confusion_matrix(const std::vector<double>& pred,
                                                        const std::vector<double>& truth,
                                                        const std::vector<double>& edges);

/// (adherence, aesthetic) for one triplet.
struct AxisPair {
  double adherence = 0;
  double aesthetic = 0;
};

struct ClassificationMetrics {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double accuracy = 0;
  /// Set when the denominator was zero; the value is then reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

/// Predicted positive iff both predicted scores >= threshold; truth positive
/// iff both human scores > baseline.
ClassificationMetrics classification_metrics(const std::vector<AxisPair>& pred, const std::vector<AxisPair>& truth,
                                             double operating_threshold = 4.7, double positive_baseline = 4.0);

struct SweepPoint {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
  bool precision_undefined = false;
};

std::vector<SweepPoint> pr_sweep(const std::vector<AxisPair>& pred, const std::vector<AxisPair>& truth,
                                 const std::vector<double>& thresholds, double positive_baseline = 4.0);

}  // namespace editmine
