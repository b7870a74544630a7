/*
 * Copyright 2026 The cblab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <vector>

#include "cbl/encoder.hpp"
#include "cbl/latent_model.hpp"
#include "cbl/rng.hpp"

namespace cbl {

/// Monte Carlo estimate of an expectation: point value, sample count and a
/// 95% normal-approximation confidence half-width.
struct LossEstimate {
    double value = 0.0;
    long n_samples = 0;
    double ci_half_width = 0.0;
};

/// Welford accumulator; ci_half_width = 1.96 * sample_std / sqrt(n).
class MeanVarAccumulator {
  public:
    void add(double x) {
        ++n_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }

    long count() const { return n_; }
    double mean() const { return mean_; }
    double sample_variance() const { return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1); }
    LossEstimate estimate() const;

  private:
    long n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// zeta(x) = log(1 + e^x), overflow-safe.
double softplus(double x);

/// log sum exp with max-shift stabilization. Errors on an empty list.
double lse(std::span<const double> values);

/// Two-way stable softmax.
std::array<double, 2> softmax2(double a, double b);

/// Cross-entropy of picking the positive among {positive, negatives} by
/// score: lse([s_pos, s_negs...]) - s_pos.
double contrastive_draw_loss(double s_pos, std::span<const double> s_negs);

/// Embeddings of one triplet (anchor, positive, negative).
struct TripletEmbedding {
    Eigen::VectorXd z1;
    Eigen::VectorXd z2;
    Eigen::VectorXd z3;
};

/// Blocks of the gradient of the triplet loss w.r.t. (z1, z2, z3).
struct TripletGrad {
    Eigen::VectorXd g1;
    Eigen::VectorXd g2;
    Eigen::VectorXd g3;

    Eigen::VectorXd flat() const;
    double max_block_norm() const;
};

/// loss = zeta(z1^T (z3 - z2)).
double triplet_loss(const TripletEmbedding& z);

/// With v = softmax(z1^T z2, z1^T z3):
///   g1 = (v1 - 1) z2 + v2 z3,  g2 = (v1 - 1) z1,  g3 = v2 z1.
TripletGrad triplet_loss_grad(const TripletEmbedding& z);

/// Contrastive population loss with n_negatives fresh negatives per draw.
LossEstimate unsupervised_loss(const Encoder& enc, const ClassSampler& model, int n_negatives,
                               long n_mc, Rng& rng);

/// Mean (discriminant) classifier: row c is the estimated mean embedding of
/// class c, rows in task order.
struct MeanClassifier {
    Eigen::MatrixXd W_mu;               // |T| x d
    std::vector<long> per_class_counts;
    Task task;
};

MeanClassifier mean_classifier(const Encoder& enc, const ClassSampler& model, const Task& task,
                               long n_per_class, Rng& rng);

/// Cross-entropy of the mean classifier over the task distribution.
LossEstimate supervised_loss_mu(const Encoder& enc, const ClassSampler& model, const Task& task,
                                const MeanClassifier& classifier, long n_mc, Rng& rng);

struct OptBudget {
    long n_train = 1000;  // labeled embedding samples for the fit
    int max_steps = 500;  // full-batch gradient descent steps
    long n_mc = 1000;     // fresh samples for the reported estimate
};

/// Budgeted upper bound on the best-linear-classifier cross-entropy: fits W
/// by full-batch gradient descent on sampled embeddings, then evaluates on
/// fresh draws. The infimum may be unattained, so the returned value is an
/// upper bound, never asserted as the infimum itself.
LossEstimate supervised_loss_opt(const Encoder& enc, const ClassSampler& model, const Task& task,
                                 const OptBudget& budget, Rng& rng);

struct TaskAverageBudget {
    int n_tasks = 50;
    long n_per_class = 500;
    long n_mc = 500;
    OptBudget opt;
};

struct AveragedLosses {
    LossEstimate sup_opt;  // task-average of the fitted-classifier loss
    LossEstimate sup_mu;   // task-average of the mean-classifier loss
};

/// Outer Monte Carlo over uniformly sampled (k+1)-way tasks; the confidence
/// interval propagates the outer (across-task) variance.
AveragedLosses averaged_supervised_losses(const Encoder& enc, const ClassSampler& model, int k,
                                          const TaskAverageBudget& budget, Rng& rng);

/// Mean-classifier column only; used where the fitted classifier is not
/// needed.
LossEstimate averaged_mu_loss(const Encoder& enc, const ClassSampler& model, int k, int n_tasks,
                              long n_per_class, long n_mc, Rng& rng);

/// Empirical training objective over a fixed dataset and its loss-vector
/// decomposition (the three gradient blocks per triplet).
struct EmpiricalObjective {
    double total = 0.0;
    std::vector<double> per_triplet;
    std::vector<TripletGrad> loss_vectors;
};

EmpiricalObjective empirical_objective(const Encoder& enc, const TripletDataset& data);

}  // namespace cbl
