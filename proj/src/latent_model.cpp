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

#include "cbl/latent_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cbl/serialize.hpp"

namespace cbl {

namespace {

Eigen::VectorXd random_unit_vector(int dim, Rng& rng) {
    Eigen::VectorXd v(dim);
    double norm = 0.0;
    do {
        for (int i = 0; i < dim; ++i) v[i] = rng.normal();
        norm = v.norm();
    } while (norm < 1e-12);
    return v / norm;
}

}  // namespace

int ClassSampler::sample_class(Rng& rng) const {
    const Eigen::VectorXd& p = rho();
    double u = rng.uniform01();
    for (int c = 0; c < static_cast<int>(p.size()); ++c) {
        u -= p[c];
        if (u < 0.0) return c;
    }
    return static_cast<int>(p.size()) - 1;
}

bool ClassSampler::rho_is_uniform(double tol) const {
    const Eigen::VectorXd& p = rho();
    const double u = 1.0 / static_cast<double>(p.size());
    return ((p.array() - u).abs() <= tol).all();
}

LatentClassModel::LatentClassModel(Eigen::VectorXd rho,
                                   std::vector<Eigen::VectorXd> class_means, double spread)
    : rho_(std::move(rho)), class_means_(std::move(class_means)), spread_(spread) {
    const int k = static_cast<int>(rho_.size());
    if (k < 2) throw std::invalid_argument("LatentClassModel: n_classes must be >= 2");
    if (static_cast<int>(class_means_.size()) != k)
        throw std::invalid_argument("LatentClassModel: one class mean per class required");
    if (rho_.minCoeff() <= 0.0)
        throw std::invalid_argument("LatentClassModel: rho entries must be strictly positive");
    if (std::abs(rho_.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("LatentClassModel: rho must sum to 1 within 1e-12");
    if (spread_ < 0.0) throw std::invalid_argument("LatentClassModel: spread must be >= 0");
    input_dim_ = static_cast<int>(class_means_.front().size());
    if (input_dim_ < 1) throw std::invalid_argument("LatentClassModel: input_dim must be >= 1");
    for (const auto& mu : class_means_) {
        if (static_cast<int>(mu.size()) != input_dim_)
            throw std::invalid_argument("LatentClassModel: class means must share one dimension");
        if (std::abs(mu.norm() - 1.0) > 1e-12)
            throw std::invalid_argument("LatentClassModel: class means must be unit-norm");
    }
}

LatentClassModel LatentClassModel::make_synthetic(int n_classes, int input_dim, double spread,
                                                  Rng& rng, Eigen::VectorXd rho) {
    if (n_classes < 2) throw std::invalid_argument("make_synthetic: n_classes must be >= 2");
    if (input_dim < 1) throw std::invalid_argument("make_synthetic: input_dim must be >= 1");
    if (rho.size() == 0)
        rho = Eigen::VectorXd::Constant(n_classes, 1.0 / static_cast<double>(n_classes));

    // Repel accidental near-duplicate means: resample while any pair of
    // means has inner product above 0.95.
    std::vector<Eigen::VectorXd> means;
    means.reserve(n_classes);
    for (int c = 0; c < n_classes; ++c) {
        constexpr int kBudget = 1000;
        bool placed = false;
        for (int attempt = 0; attempt < kBudget && !placed; ++attempt) {
            Eigen::VectorXd candidate = random_unit_vector(input_dim, rng);
            placed = std::all_of(means.begin(), means.end(), [&](const Eigen::VectorXd& m) {
                return m.dot(candidate) <= 0.95;
            });
            if (placed) means.push_back(std::move(candidate));
        }
        if (!placed)
            throw std::runtime_error(
                "make_synthetic: could not place class means with pairwise inner product <= "
                "0.95; increase input_dim or reduce n_classes");
    }
    return LatentClassModel(std::move(rho), std::move(means), spread);
}

Eigen::VectorXd LatentClassModel::draw(int class_id, Rng& rng) const {
    if (class_id < 0 || class_id >= n_classes())
        throw std::out_of_range("LatentClassModel::draw: bad class index");
    const Eigen::VectorXd& mu = class_means_[class_id];
    if (spread_ == 0.0) return mu;
    Eigen::VectorXd v(input_dim_);
    for (int attempt = 0; attempt < 100; ++attempt) {
        for (int i = 0; i < input_dim_; ++i) v[i] = mu[i] + spread_ * rng.normal();
        const double norm = v.norm();
        if (norm > 1e-12) return v / norm;
    }
    throw std::runtime_error("LatentClassModel::draw: degenerate zero-norm sample");
}

Task full_task(const ClassSampler& model) {
    Task t;
    t.class_ids.resize(model.n_classes());
    std::iota(t.class_ids.begin(), t.class_ids.end(), 0);
    return t;
}

PositivePair sample_positive_pair(const ClassSampler& model, Rng& rng) {
    const int c = model.sample_class(rng);
    PositivePair pair;
    pair.x = model.draw(c, rng);
    pair.x_plus = model.draw(c, rng);
    pair.class_id = c;
    return pair;
}

std::vector<LabeledSample> sample_negatives(const ClassSampler& model, int count, Rng& rng) {
    if (count < 1) throw std::invalid_argument("sample_negatives: count must be >= 1");
    std::vector<LabeledSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        const int c = model.sample_class(rng);
        out.push_back({model.draw(c, rng), c});
    }
    return out;
}

Task sample_task(const ClassSampler& model, int k, Rng& rng) {
    const int n_classes = model.n_classes();
    if (k < 1 || k + 1 > n_classes)
        throw std::invalid_argument("sample_task: need 1 <= k <= n_classes - 1");
    if (!model.rho_is_uniform())
        throw std::invalid_argument("sample_task: task sampling requires a uniform prior");

    // Partial Fisher-Yates: uniform over ordered (k+1)-tuples, hence uniform
    // over unordered subsets after sorting.
    std::vector<int> pool(n_classes);
    std::iota(pool.begin(), pool.end(), 0);
    Task task;
    task.class_ids.reserve(k + 1);
    for (int i = 0; i < k + 1; ++i) {
        const auto j = i + static_cast<int>(rng.uniform_int(n_classes - i));
        std::swap(pool[i], pool[j]);
        task.class_ids.push_back(pool[i]);
    }
    std::sort(task.class_ids.begin(), task.class_ids.end());
    return task;
}

TripletDataset::TripletDataset(std::vector<Triplet> triplets,
                               std::optional<std::vector<TripletLabels>> labels, double delta)
    : triplets_(std::move(triplets)), labels_(std::move(labels)), delta_(delta) {
    if (triplets_.empty()) throw std::invalid_argument("TripletDataset: empty dataset");
    if (labels_ && labels_->size() != triplets_.size())
        throw std::invalid_argument("TripletDataset: label count mismatch");
    if (delta_ <= 0.0) throw std::invalid_argument("TripletDataset: delta must be positive");
    for (const auto& t : triplets_) {
        for (const Eigen::VectorXd* v : {&t.x, &t.x_plus, &t.x_minus}) {
            if (std::abs(v->norm() - 1.0) > 1e-9)
                throw std::invalid_argument("TripletDataset: members must be unit-norm (1e-9)");
        }
    }
}

Eigen::MatrixXd TripletDataset::member_matrix() const {
    const int d = input_dim();
    Eigen::MatrixXd members(d, 3 * size());
    for (int i = 0; i < size(); ++i) {
        members.col(3 * i) = triplets_[i].x;
        members.col(3 * i + 1) = triplets_[i].x_plus;
        members.col(3 * i + 2) = triplets_[i].x_minus;
    }
    return members;
}

double TripletDataset::min_pairwise_distance(const std::vector<Triplet>& triplets) {
    std::vector<const Eigen::VectorXd*> members;
    members.reserve(3 * triplets.size());
    for (const auto& t : triplets) {
        members.push_back(&t.x);
        members.push_back(&t.x_plus);
        members.push_back(&t.x_minus);
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < members.size(); ++i)
        for (std::size_t j = i + 1; j < members.size(); ++j)
            best = std::min(best, (*members[i] - *members[j]).norm());
    return best;
}

namespace {

Eigen::VectorXd perturb_and_normalize(Eigen::VectorXd v, double noise, Rng& rng) {
    if (noise > 0.0) {
        for (int i = 0; i < v.size(); ++i) v[i] += noise * rng.normal();
        const double norm = v.norm();
        if (norm < 1e-12)
            throw std::runtime_error("build_triplet_dataset: perturbation collapsed a member");
        v /= norm;
    }
    return v;
}

double min_distance_to(const std::vector<Eigen::VectorXd>& accepted, const Eigen::VectorXd& v) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : accepted) best = std::min(best, (a - v).norm());
    return best;
}

}  // namespace

TripletDataset build_triplet_dataset(const ClassSampler& model, int n, double augment_noise,
                                     double min_delta, Rng& rng) {
    if (n < 1) throw std::invalid_argument("build_triplet_dataset: n must be >= 1");
    if (augment_noise < 0.0)
        throw std::invalid_argument("build_triplet_dataset: augment_noise must be >= 0");
    if (min_delta <= 0.0)
        throw std::invalid_argument("build_triplet_dataset: min_delta must be positive");

    constexpr int kRetriesPerMember = 100;
    std::vector<Eigen::VectorXd> accepted;
    accepted.reserve(3 * n);

    // Separation is enforced by rejection; the retry budget makes failure
    // loud instead of silently shipping a non-separated dataset.
    auto accept_member = [&](auto&& propose, const char* what) -> Eigen::VectorXd {
        double best_achieved = 0.0;
        for (int attempt = 0; attempt < kRetriesPerMember; ++attempt) {
            Eigen::VectorXd candidate = propose();
            const double dist = min_distance_to(accepted, candidate);
            if (dist >= min_delta) {
                accepted.push_back(candidate);
                return candidate;
            }
            best_achieved = std::max(best_achieved, dist);
        }
        throw std::runtime_error(
            std::string("build_triplet_dataset: could not delta-separate ") + what + " after " +
            std::to_string(kRetriesPerMember) + " retries; best achieved distance " +
            std::to_string(best_achieved) + " < min_delta " + std::to_string(min_delta));
    };

    std::vector<Triplet> triplets;
    std::vector<TripletLabels> labels;
    triplets.reserve(n);
    labels.reserve(n);
    for (int i = 0; i < n; ++i) {
        const int c = model.sample_class(rng);
        Triplet t;
        t.x = accept_member([&] { return model.draw(c, rng); }, "anchor");
        t.x_plus = accept_member(
            [&] { return perturb_and_normalize(model.draw(c, rng), augment_noise, rng); },
            "positive");
        int c_minus = -1;
        t.x_minus = accept_member(
            [&] {
                c_minus = model.sample_class(rng);
                return perturb_and_normalize(model.draw(c_minus, rng), augment_noise, rng);
            },
            "negative");
        triplets.push_back(std::move(t));
        labels.push_back({c, c, c_minus});
    }

    const double delta = TripletDataset::min_pairwise_distance(triplets);
    return TripletDataset(std::move(triplets), std::move(labels), delta);
}

void save_dataset(const TripletDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
    detail::write_magic(out, "CBL1");
    detail::write_u32(out, 1);  // version
    detail::write_u32(out, static_cast<std::uint32_t>(data.size()));
    detail::write_u32(out, static_cast<std::uint32_t>(data.input_dim()));
    detail::write_f64(out, data.delta());
    for (const auto& t : data.triplets())
        for (const Eigen::VectorXd* v : {&t.x, &t.x_plus, &t.x_minus})
            for (int i = 0; i < v->size(); ++i) detail::write_f64(out, (*v)[i]);
    const bool has_labels = data.labels().has_value();
    detail::write_u8(out, has_labels ? 1 : 0);
    if (has_labels) {
        for (const auto& l : *data.labels()) {
            detail::write_u32(out, static_cast<std::uint32_t>(l.c));
            detail::write_u32(out, static_cast<std::uint32_t>(l.c_plus));
            detail::write_u32(out, static_cast<std::uint32_t>(l.c_minus));
        }
    }
    if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

TripletDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
    detail::expect_magic(in, "CBL1", path);
    const std::uint32_t version = detail::read_u32(in, path);
    if (version != 1)
        throw std::runtime_error("load_dataset: unsupported version " + std::to_string(version));
    const std::uint32_t n = detail::read_u32(in, path);
    const std::uint32_t d = detail::read_u32(in, path);
    const double delta = detail::read_f64(in, path);
    if (n == 0 || d == 0) throw std::runtime_error("load_dataset: empty dataset in " + path);

    std::vector<Triplet> triplets(n);
    for (auto& t : triplets) {
        for (Eigen::VectorXd* v : {&t.x, &t.x_plus, &t.x_minus}) {
            v->resize(d);
            for (std::uint32_t i = 0; i < d; ++i) (*v)[i] = detail::read_f64(in, path);
        }
    }
    std::optional<std::vector<TripletLabels>> labels;
    if (detail::read_u8(in, path) != 0) {
        labels.emplace(n);
        for (auto& l : *labels) {
            l.c = static_cast<int>(detail::read_u32(in, path));
            l.c_plus = static_cast<int>(detail::read_u32(in, path));
            l.c_minus = static_cast<int>(detail::read_u32(in, path));
        }
    }
    return TripletDataset(std::move(triplets), std::move(labels), delta);
}

}  // namespace cbl
