/* Copyright 2026 The osgate Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

// Per-detection confidence / uncertainty scores and the joint softmax +
// GMM-entropy decision rule.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "osgate/parallel.hpp"
#include "osgate/types.hpp"

namespace osgate {

enum class Decision { kId, kOod };

struct ScoreBundle {
  double softmax_conf = 0.0;      // max_c p_c at T_model
  double softmax_density = 0.0;   // log sum_c exp(l_c / T_model)
  double softmax_entropy = 0.0;   // nats
  double gmm_density = 0.0;       // log sum_c pi_c exp(ll_c), tempered
  double gmm_posterior_entropy = 0.0;  // H_gmm, nats
  double gmm_per_class_max = 0.0;      // max_c ll_c, tempered
  double multi_gmm_density = 0.0;      // prior-weighted marginal of the K-component models
  std::optional<Decision> joint_decision;
};

// Numerically stable softmax(logits / temperature).
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits, double temperature = 1.0);
std::vector<double> softmax(std::span<const float> logits, double temperature = 1.0);

// -sum p log p in nats (0 log 0 = 0).
double entropy(const Eigen::Ref<const Eigen::VectorXd>& p);

struct SoftmaxScores {
  double conf = 0.0;
  double density = 0.0;
  double entropy = 0.0;
};

// Confidence, log-sum-exp density and entropy of softmax(l / T). With T = 1 the
// density is the raw log-sum-exp of the logits.
SoftmaxScores score_softmax_family(std::span<const float> logits, double t_model);
SoftmaxScores score_softmax_family(const Eigen::Ref<const Eigen::VectorXd>& logits, double t_model);

struct GmmScores {
  double density = 0.0;
  double posterior_entropy = 0.0;
  double per_class_max = 0.0;
  double multi_density = 0.0;
};

// Temperature convention: posterior = softmax((ll + log pi) / T_gmm); densities
// are log-sum-exp((ll + log pi) / T_gmm); per-class max is max(ll) / T_gmm.
// At T_gmm = 1 these reduce to the untempered definitions.
GmmScores score_gmm_family(const Eigen::Ref<const Eigen::VectorXd>& embedding,
                           std::span<const ClassDensityModel> single_models,
                           std::span<const ClassDensityModel> multi_models, double t_gmm,
                           bool use_priors = true);

// Same from precomputed per-class log-likelihood vectors.
GmmScores score_gmm_from_loglik(const Eigen::Ref<const Eigen::VectorXd>& single_loglik,
                                const Eigen::Ref<const Eigen::VectorXd>& multi_loglik,
                                const Eigen::Ref<const Eigen::VectorXd>& log_priors, double t_gmm);

// ID iff softmax_conf >= tau_soft and gmm_posterior_entropy <= tau_gmm.
Decision joint_decide(const ScoreBundle& bundle, const JointThresholds& thresholds);

// Empirical distributions of the two joint-rule signals over in-distribution
// validation detections, kept sorted.
class ValidationReference {
 public:
  ValidationReference() = default;
  // Throws ConfigError when empty or when the two spans differ in length.
  ValidationReference(std::span<const double> softmax_conf,
                      std::span<const double> posterior_entropy);

  // Fraction of reference values <= value.
  double soft_cdf(double softmax_conf) const;
  // Fraction of reference (-H) values <= -entropy.
  double neg_entropy_cdf(double posterior_entropy) const;

  std::size_t size() const { return soft_.size(); }
  bool empty() const { return soft_.empty(); }
  const std::vector<double>& sorted_soft() const { return soft_; }
  const std::vector<double>& sorted_neg_entropy() const { return neg_entropy_; }

  static ValidationReference from_sorted(std::vector<double> sorted_soft,
                                         std::vector<double> sorted_neg_entropy);

 private:
  std::vector<double> soft_;
  std::vector<double> neg_entropy_;
};

// min(F_soft(s_soft), F_negH(-H_gmm)): a scalar whose upper level sets are the
// joint rule's accept regions as both validation quantiles move together.
// Throws ConfigError on an empty reference.
double joint_fused_score(const ScoreBundle& bundle, const ValidationReference& reference);

// Every score a report can rank detections by. Values are oriented so that
// higher means "more in-distribution" (entropies are negated).
enum class ScoreKind {
  kSoftmaxConf,
  kSoftmaxDensity,
  kSoftmaxEntropy,
  kGmmDensity,
  kGmmEntropy,
  kGmmPerClass,
  kMultiGmmDensity,
  kJoint,
};

inline constexpr ScoreKind kAllScoreKinds[] = {
    ScoreKind::kSoftmaxConf, ScoreKind::kSoftmaxDensity, ScoreKind::kSoftmaxEntropy,
    ScoreKind::kGmmDensity,  ScoreKind::kGmmEntropy,     ScoreKind::kGmmPerClass,
    ScoreKind::kMultiGmmDensity, ScoreKind::kJoint};

// The default report rows: the three softmax scores, GMM density, GMM entropy,
// GMM per class and joint thresholding.
inline constexpr ScoreKind kDefaultScoreKinds[] = {
    ScoreKind::kSoftmaxConf, ScoreKind::kSoftmaxDensity, ScoreKind::kSoftmaxEntropy,
    ScoreKind::kGmmDensity,  ScoreKind::kGmmEntropy,     ScoreKind::kGmmPerClass,
    ScoreKind::kJoint};

std::string_view to_string(ScoreKind kind);
ScoreKind parse_score_kind(std::string_view name);

// ID-oriented scalar for one score kind. kJoint requires a reference.
double oriented_score(const ScoreBundle& bundle, ScoreKind kind,
                      const ValidationReference* reference = nullptr);

// Batch scoring of detections for one temperature pair. Row order follows the
// input. The parallel path evaluates densities with the blocked kernels.
struct ScoringContext {
  std::span<const ClassDensityModel> single_models;
  std::span<const ClassDensityModel> multi_models;
  double t_model = 1.0;
  double t_gmm = 1.0;
  bool use_priors = true;
};

std::vector<ScoreBundle> score_detections(std::span<const DetectionRecord> detections,
                                          const ScoringContext& context,
                                          ExecPolicy policy = ExecPolicy::kParallel);

// Same, from pre-stacked logits (n x C) and embeddings (n x dim).
std::vector<ScoreBundle> score_batch(const Eigen::Ref<const Eigen::MatrixXd>& logits,
                                     const Eigen::Ref<const Eigen::MatrixXd>& embeddings,
                                     const ScoringContext& context,
                                     ExecPolicy policy = ExecPolicy::kParallel);

}  // namespace osgate
