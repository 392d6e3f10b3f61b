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

#include "osgate/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "osgate/density.hpp"
#include "osgate/error.hpp"

namespace osgate {

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits, double temperature) {
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be positive");
  const Eigen::VectorXd a = logits / temperature;
  const double lse = log_sum_exp(a);
  // Scalar exp keeps equal logits equal; the packet and tail paths of the
  // vectorised exp can round the same input differently.
  return (a.array() - lse).unaryExpr([](double x) { return std::exp(x); }).matrix();
}

std::vector<double> softmax(std::span<const float> logits, double temperature) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(logits.size()));
  for (std::size_t i = 0; i < logits.size(); ++i) v(static_cast<Eigen::Index>(i)) = logits[i];
  const Eigen::VectorXd p = softmax(v, temperature);
  return {p.data(), p.data() + p.size()};
}

double entropy(const Eigen::Ref<const Eigen::VectorXd>& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) h -= p(i) * std::log(p(i));
  }
  return std::max(h, 0.0);
}

SoftmaxScores score_softmax_family(const Eigen::Ref<const Eigen::VectorXd>& logits,
                                   double t_model) {
  if (!(t_model > 0.0)) throw ArgumentError("T_model must be positive");
  const Eigen::VectorXd a = logits / t_model;
  const double lse = log_sum_exp(a);
  const Eigen::VectorXd p = (a.array() - lse).unaryExpr([](double x) { return std::exp(x); }).matrix();
  return {p.maxCoeff(), lse, entropy(p)};
}

SoftmaxScores score_softmax_family(std::span<const float> logits, double t_model) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(logits.size()));
  for (std::size_t i = 0; i < logits.size(); ++i) v(static_cast<Eigen::Index>(i)) = logits[i];
  return score_softmax_family(v, t_model);
}

GmmScores score_gmm_from_loglik(const Eigen::Ref<const Eigen::VectorXd>& single_loglik,
                                const Eigen::Ref<const Eigen::VectorXd>& multi_loglik,
                                const Eigen::Ref<const Eigen::VectorXd>& log_priors, double t_gmm) {
  if (!(t_gmm > 0.0)) throw ArgumentError("T_gmm must be positive");
  const Eigen::VectorXd joint = (single_loglik + log_priors) / t_gmm;
  const double lse = log_sum_exp(joint);
  const Eigen::VectorXd q =
      (joint.array() - lse).unaryExpr([](double x) { return std::exp(x); }).matrix();
  GmmScores out;
  out.density = lse;
  out.posterior_entropy = entropy(q);
  out.per_class_max = single_loglik.maxCoeff() / t_gmm;
  out.multi_density = log_sum_exp((multi_loglik + log_priors) / t_gmm);
  return out;
}

GmmScores score_gmm_family(const Eigen::Ref<const Eigen::VectorXd>& embedding,
                           std::span<const ClassDensityModel> single_models,
                           std::span<const ClassDensityModel> multi_models, double t_gmm,
                           bool use_priors) {
  const Eigen::VectorXd single = per_class_loglik(embedding, single_models);
  const Eigen::VectorXd multi = per_class_loglik(embedding, multi_models);
  const Eigen::VectorXd pri = use_priors ? class_log_priors(single_models)
                                         : Eigen::VectorXd::Zero(single.size()).eval();
  return score_gmm_from_loglik(single, multi, pri, t_gmm);
}

Decision joint_decide(const ScoreBundle& bundle, const JointThresholds& thresholds) {
  return (bundle.softmax_conf >= thresholds.tau_soft &&
          bundle.gmm_posterior_entropy <= thresholds.tau_gmm)
             ? Decision::kId
             : Decision::kOod;
}

ValidationReference::ValidationReference(std::span<const double> softmax_conf,
                                         std::span<const double> posterior_entropy) {
  if (softmax_conf.empty()) throw ConfigError("validation reference is empty");
  if (softmax_conf.size() != posterior_entropy.size()) {
    throw ConfigError("validation reference signals differ in length");
  }
  soft_.assign(softmax_conf.begin(), softmax_conf.end());
  neg_entropy_.reserve(posterior_entropy.size());
  for (double h : posterior_entropy) neg_entropy_.push_back(-h);
  std::sort(soft_.begin(), soft_.end());
  std::sort(neg_entropy_.begin(), neg_entropy_.end());
}

ValidationReference ValidationReference::from_sorted(std::vector<double> sorted_soft,
                                                     std::vector<double> sorted_neg_entropy) {
  if (sorted_soft.empty()) throw ConfigError("validation reference is empty");
  if (sorted_soft.size() != sorted_neg_entropy.size() ||
      !std::is_sorted(sorted_soft.begin(), sorted_soft.end()) ||
      !std::is_sorted(sorted_neg_entropy.begin(), sorted_neg_entropy.end())) {
    throw ConfigError("validation reference arrays must be sorted and equal length");
  }
  ValidationReference ref;
  ref.soft_ = std::move(sorted_soft);
  ref.neg_entropy_ = std::move(sorted_neg_entropy);
  return ref;
}

namespace {

double ecdf(const std::vector<double>& sorted, double value) {
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), value);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

}  // namespace

double ValidationReference::soft_cdf(double softmax_conf) const { return ecdf(soft_, softmax_conf); }

double ValidationReference::neg_entropy_cdf(double posterior_entropy) const {
  return ecdf(neg_entropy_, -posterior_entropy);
}

double joint_fused_score(const ScoreBundle& bundle, const ValidationReference& reference) {
  if (reference.empty()) throw ConfigError("joint fused score needs a validation reference");
  return std::min(reference.soft_cdf(bundle.softmax_conf),
                  reference.neg_entropy_cdf(bundle.gmm_posterior_entropy));
}

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::kSoftmaxConf: return "softmax";
    case ScoreKind::kSoftmaxDensity: return "softmax_density";
    case ScoreKind::kSoftmaxEntropy: return "softmax_entropy";
    case ScoreKind::kGmmDensity: return "gmm_density";
    case ScoreKind::kGmmEntropy: return "gmm_entropy";
    case ScoreKind::kGmmPerClass: return "gmm_per_class";
    case ScoreKind::kMultiGmmDensity: return "multi_gmm_density";
    case ScoreKind::kJoint: return "joint";
  }
  return "softmax";
}

ScoreKind parse_score_kind(std::string_view name) {
  for (ScoreKind kind : kAllScoreKinds) {
    if (to_string(kind) == name) return kind;
  }
  if (name == "softmax_conf") return ScoreKind::kSoftmaxConf;
  throw ArgumentError("unknown score '" + std::string(name) + "'");
}

double oriented_score(const ScoreBundle& bundle, ScoreKind kind,
                      const ValidationReference* reference) {
  switch (kind) {
    case ScoreKind::kSoftmaxConf: return bundle.softmax_conf;
    case ScoreKind::kSoftmaxDensity: return bundle.softmax_density;
    case ScoreKind::kSoftmaxEntropy: return -bundle.softmax_entropy;
    case ScoreKind::kGmmDensity: return bundle.gmm_density;
    case ScoreKind::kGmmEntropy: return -bundle.gmm_posterior_entropy;
    case ScoreKind::kGmmPerClass: return bundle.gmm_per_class_max;
    case ScoreKind::kMultiGmmDensity: return bundle.multi_gmm_density;
    case ScoreKind::kJoint:
      if (reference == nullptr) throw ConfigError("joint score needs a validation reference");
      return joint_fused_score(bundle, *reference);
  }
  return 0.0;
}

std::vector<ScoreBundle> score_batch(const Eigen::Ref<const Eigen::MatrixXd>& logits,
                                     const Eigen::Ref<const Eigen::MatrixXd>& embeddings,
                                     const ScoringContext& context, ExecPolicy policy) {
  const Eigen::Index n = logits.rows();
  if (embeddings.rows() != n) throw ArgumentError("logits and embeddings row counts differ");
  if (context.single_models.size() != static_cast<std::size_t>(logits.cols()) ||
      context.multi_models.size() != context.single_models.size()) {
    throw ArgumentError("model count does not match the number of classes");
  }
  const Eigen::VectorXd pri = context.use_priors
                                  ? class_log_priors(context.single_models)
                                  : Eigen::VectorXd::Zero(logits.cols()).eval();
  std::vector<ScoreBundle> out(static_cast<std::size_t>(n));

  auto fill = [&](Eigen::Index i, const Eigen::VectorXd& single, const Eigen::VectorXd& multi) {
    const auto s = score_softmax_family(logits.row(i).transpose(), context.t_model);
    const auto g = score_gmm_from_loglik(single, multi, pri, context.t_gmm);
    auto& b = out[static_cast<std::size_t>(i)];
    b.softmax_conf = s.conf;
    b.softmax_density = s.density;
    b.softmax_entropy = s.entropy;
    b.gmm_density = g.density;
    b.gmm_posterior_entropy = g.posterior_entropy;
    b.gmm_per_class_max = g.per_class_max;
    b.multi_gmm_density = g.multi_density;
  };

  if (policy == ExecPolicy::kSerial) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd e = embeddings.row(i).transpose();
      fill(i, per_class_loglik(e, context.single_models),
           per_class_loglik(e, context.multi_models));
    }
    return out;
  }

  const Eigen::MatrixXd single =
      per_class_loglik_batch(embeddings, context.single_models, ExecPolicy::kParallel);
  const Eigen::MatrixXd multi =
      per_class_loglik_batch(embeddings, context.multi_models, ExecPolicy::kParallel);
#pragma omp parallel for schedule(static) num_threads(thread_cap())
  for (Eigen::Index i = 0; i < n; ++i) {
    fill(i, single.row(i).transpose(), multi.row(i).transpose());
  }
  return out;
}

std::vector<ScoreBundle> score_detections(std::span<const DetectionRecord> detections,
                                          const ScoringContext& context, ExecPolicy policy) {
  const auto n = static_cast<Eigen::Index>(detections.size());
  const Eigen::Index classes = static_cast<Eigen::Index>(context.single_models.size());
  const Eigen::Index dim = context.single_models.empty() ? 0 : context.single_models[0].dim();
  Eigen::MatrixXd logits(n, classes);
  Eigen::MatrixXd embeddings(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& d = detections[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(d.logits.size()) != classes ||
        static_cast<Eigen::Index>(d.embedding.size()) != dim) {
      throw ArgumentError("detection " + std::to_string(i) + " does not match model dimensions");
    }
    for (Eigen::Index c = 0; c < classes; ++c) logits(i, c) = d.logits[static_cast<std::size_t>(c)];
    for (Eigen::Index j = 0; j < dim; ++j) embeddings(i, j) = d.embedding[static_cast<std::size_t>(j)];
  }
  return score_batch(logits, embeddings, context, policy);
}

}  // namespace osgate
