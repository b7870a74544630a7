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
#include <optional>
#include <string>
#include <vector>

#include "cbl/rng.hpp"

namespace cbl {

/// Class-conditional input model: a finite set of latent classes with a
/// strictly positive prior and one input distribution per class. Implemented
/// by LatentClassModel (synthetic) and by empirical pools (e.g. IDX images).
class ClassSampler {
  public:
    virtual ~ClassSampler() = default;

    virtual int n_classes() const = 0;
    virtual int input_dim() const = 0;
    virtual const Eigen::VectorXd& rho() const = 0;

    /// One draw from the class-conditional input distribution.
    virtual Eigen::VectorXd draw(int class_id, Rng& rng) const = 0;

    /// c ~ rho by inverse-CDF walk.
    int sample_class(Rng& rng) const;

    bool rho_is_uniform(double tol = 1e-12) const;
};

/// Synthetic generative model: class means on the unit sphere, isotropic
/// Gaussian dispersion with scale `spread`, samples projected back to the
/// sphere so every input has unit norm by construction.
class LatentClassModel final : public ClassSampler {
  public:
    /// Validates all invariants: rho sums to 1 (1e-12), min(rho) > 0,
    /// n_classes >= 2, every class mean unit-norm within 1e-12.
    LatentClassModel(Eigen::VectorXd rho, std::vector<Eigen::VectorXd> class_means,
                     double spread);

    /// Class means sampled uniformly on the sphere, resampled while any pair
    /// has inner product > 0.95. Empty rho means uniform.
    static LatentClassModel make_synthetic(int n_classes, int input_dim, double spread,
                                           Rng& rng, Eigen::VectorXd rho = {});

    int n_classes() const override { return static_cast<int>(rho_.size()); }
    int input_dim() const override { return input_dim_; }
    const Eigen::VectorXd& rho() const override { return rho_; }
    double spread() const { return spread_; }
    const std::vector<Eigen::VectorXd>& class_means() const { return class_means_; }

    Eigen::VectorXd draw(int class_id, Rng& rng) const override;

  private:
    Eigen::VectorXd rho_;
    std::vector<Eigen::VectorXd> class_means_;
    double spread_ = 0.0;
    int input_dim_ = 0;
};

/// A (k+1)-way classification task: k+1 distinct class indices, kept sorted.
struct Task {
    std::vector<int> class_ids;

    int ways() const { return static_cast<int>(class_ids.size()); }
};

/// Task over the whole class set.
Task full_task(const ClassSampler& model);

struct PositivePair {
    Eigen::VectorXd x;
    Eigen::VectorXd x_plus;
    int class_id;  // evaluation-side bookkeeping only
};

struct LabeledSample {
    Eigen::VectorXd x;
    int class_id;
};

struct TripletLabels {
    int c;
    int c_plus;
    int c_minus;
};

struct Triplet {
    Eigen::VectorXd x;
    Eigen::VectorXd x_plus;
    Eigen::VectorXd x_minus;
};

/// Fixed training set of triplets with delta-separation metadata. Labels are
/// retained for diagnostics only and are never consumed by training.
class TripletDataset {
  public:
    TripletDataset(std::vector<Triplet> triplets,
                   std::optional<std::vector<TripletLabels>> labels, double delta);

    const std::vector<Triplet>& triplets() const { return triplets_; }
    const std::optional<std::vector<TripletLabels>>& labels() const { return labels_; }
    double delta() const { return delta_; }
    int size() const { return static_cast<int>(triplets_.size()); }
    int input_dim() const { return static_cast<int>(triplets_.front().x.size()); }

    /// All 3n members as columns, ordered (x, x+, x-) per triplet.
    Eigen::MatrixXd member_matrix() const;

    /// Brute-force O((3n)^2) minimum pairwise distance over all members.
    static double min_pairwise_distance(const std::vector<Triplet>& triplets);

  private:
    std::vector<Triplet> triplets_;
    std::optional<std::vector<TripletLabels>> labels_;
    double delta_ = 0.0;
};

/// (x, x+) from a shared latent class c ~ rho; both draws independent.
PositivePair sample_positive_pair(const ClassSampler& model, Rng& rng);

/// `count` independent draws from the class-marginal mixture.
std::vector<LabeledSample> sample_negatives(const ClassSampler& model, int count, Rng& rng);

/// Uniform (k+1)-subset of classes. Requires uniform rho and k+1 <= n_classes.
Task sample_task(const ClassSampler& model, int k, Rng& rng);

/// n triplets via positive-pair + single-negative sampling. If augment_noise
/// is positive, x+ and x- get one fixed Gaussian perturbation at construction
/// and are renormalized. Members closer than min_delta to any already
/// accepted member are resampled (100 retries each); failure is an error
/// reporting the best distance achieved.
TripletDataset build_triplet_dataset(const ClassSampler& model, int n, double augment_noise,
                                     double min_delta, Rng& rng);

/// Flat binary serialization (magic "CBL1"); see README for the layout.
void save_dataset(const TripletDataset& data, const std::string& path);
TripletDataset load_dataset(const std::string& path);

}  // namespace cbl
