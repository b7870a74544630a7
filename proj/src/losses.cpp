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

#include "cbl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbl {

namespace {

// Cap on batched-forward columns; draws are processed in fixed-size chunks
// reduced sequentially, so results do not depend on the chunk size chosen
// for a given call pattern.
constexpr long kMaxBatchColumns = 8192;

// Conditional prior rho(c | c in T) as a dense vector over task positions.
Eigen::VectorXd task_conditional_prior(const ClassSampler& model, const Task& task) {
    Eigen::VectorXd w(task.ways());
    for (int i = 0; i < task.ways(); ++i) w[i] = model.rho()[task.class_ids[i]];
    const double z = w.sum();
    if (z <= 0.0) throw std::invalid_argument("task has zero prior mass");
    return w / z;
}

int sample_from_cdf(const Eigen::VectorXd& weights, Rng& rng) {
    double u = rng.uniform01();
    for (int i = 0; i < weights.size(); ++i) {
        u -= weights[i];
        if (u < 0.0) return i;
    }
    return static_cast<int>(weights.size()) - 1;
}

double cross_entropy_from_logits(const Eigen::VectorXd& logits, int target_row) {
    return lse({logits.data(), static_cast<std::size_t>(logits.size())}) - logits[target_row];
}

}  // namespace

LossEstimate MeanVarAccumulator::estimate() const {
    if (n_ < 1) throw std::logic_error("MeanVarAccumulator: no samples");
    LossEstimate e;
    e.value = mean_;
    e.n_samples = n_;
    e.ci_half_width = 1.96 * std::sqrt(sample_variance() / static_cast<double>(n_));
    return e;
}

double softplus(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("softplus: non-finite input");
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double lse(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("lse: empty input");
    double m = values[0];
    for (double v : values) m = std::max(m, v);
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - m);
    return m + std::log(sum);
}

std::array<double, 2> softmax2(double a, double b) {
    const double m = std::max(a, b);
    const double ea = std::exp(a - m);
    const double eb = std::exp(b - m);
    const double s = ea + eb;
    return {ea / s, eb / s};
}

double contrastive_draw_loss(double s_pos, std::span<const double> s_negs) {
    if (s_negs.empty()) throw std::invalid_argument("contrastive_draw_loss: no negatives");
    double m = s_pos;
    for (double v : s_negs) m = std::max(m, v);
    double sum = std::exp(s_pos - m);
    for (double v : s_negs) sum += std::exp(v - m);
    return m + std::log(sum) - s_pos;
}

double triplet_loss(const TripletEmbedding& z) {
    return softplus(z.z1.dot(z.z3 - z.z2));
}

TripletGrad triplet_loss_grad(const TripletEmbedding& z) {
    const auto v = softmax2(z.z1.dot(z.z2), z.z1.dot(z.z3));
    TripletGrad g;
    g.g1 = (v[0] - 1.0) * z.z2 + v[1] * z.z3;
    g.g2 = (v[0] - 1.0) * z.z1;
    g.g3 = v[1] * z.z1;
    return g;
}

Eigen::VectorXd TripletGrad::flat() const {
    Eigen::VectorXd out(g1.size() + g2.size() + g3.size());
    out << g1, g2, g3;
    return out;
}

double TripletGrad::max_block_norm() const {
    return std::max({g1.norm(), g2.norm(), g3.norm()});
}

LossEstimate unsupervised_loss(const Encoder& enc, const ClassSampler& model, int n_negatives,
                               long n_mc, Rng& rng) {
    if (n_negatives < 1) throw std::invalid_argument("unsupervised_loss: need n_negatives >= 1");
    if (n_mc < 2) throw std::invalid_argument("unsupervised_loss: need n_mc >= 2");

    const int cols_per_draw = 2 + n_negatives;
    const long draws_per_chunk = std::max<long>(1, kMaxBatchColumns / cols_per_draw);
    MeanVarAccumulator acc;
    std::vector<double> neg_scores(n_negatives);

    long remaining = n_mc;
    while (remaining > 0) {
        const long nd = std::min(draws_per_chunk, remaining);
        Eigen::MatrixXd X(model.input_dim(), nd * cols_per_draw);
        for (long i = 0; i < nd; ++i) {
            const auto pair = sample_positive_pair(model, rng);
            X.col(i * cols_per_draw) = pair.x;
            X.col(i * cols_per_draw + 1) = pair.x_plus;
            const auto negs = sample_negatives(model, n_negatives, rng);
            for (int j = 0; j < n_negatives; ++j)
                X.col(i * cols_per_draw + 2 + j) = negs[j].x;
        }
        const Eigen::MatrixXd Y = enc.apply_batch(X);
        for (long i = 0; i < nd; ++i) {
            const auto y = Y.col(i * cols_per_draw);
            const double s_pos = y.dot(Y.col(i * cols_per_draw + 1));
            for (int j = 0; j < n_negatives; ++j)
                neg_scores[j] = y.dot(Y.col(i * cols_per_draw + 2 + j));
            acc.add(contrastive_draw_loss(s_pos, neg_scores));
        }
        remaining -= nd;
    }
    return acc.estimate();
}

MeanClassifier mean_classifier(const Encoder& enc, const ClassSampler& model, const Task& task,
                               long n_per_class, Rng& rng) {
    if (n_per_class < 1) throw std::invalid_argument("mean_classifier: need n_per_class >= 1");
    MeanClassifier out;
    out.task = task;
    out.W_mu.resize(task.ways(), enc.output_dim());
    out.per_class_counts.assign(task.ways(), n_per_class);
    for (int i = 0; i < task.ways(); ++i) {
        const int c = task.class_ids[i];
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(enc.output_dim());
        long remaining = n_per_class;
        while (remaining > 0) {
            const long nd = std::min(kMaxBatchColumns, remaining);
            Eigen::MatrixXd X(model.input_dim(), nd);
            for (long j = 0; j < nd; ++j) X.col(j) = model.draw(c, rng);
            sum += enc.apply_batch(X).rowwise().sum();
            remaining -= nd;
        }
        out.W_mu.row(i) = (sum / static_cast<double>(n_per_class)).transpose();
    }
    return out;
}

LossEstimate supervised_loss_mu(const Encoder& enc, const ClassSampler& model, const Task& task,
                                const MeanClassifier& classifier, long n_mc, Rng& rng) {
    if (n_mc < 1) throw std::invalid_argument("supervised_loss_mu: need n_mc >= 1");
    if (classifier.task.class_ids != task.class_ids)
        throw std::invalid_argument("supervised_loss_mu: classifier rows not aligned with task");

    const Eigen::VectorXd prior = task_conditional_prior(model, task);
    MeanVarAccumulator acc;
    std::vector<int> target_rows(kMaxBatchColumns);

    long remaining = n_mc;
    while (remaining > 0) {
        const long nd = std::min(kMaxBatchColumns, remaining);
        Eigen::MatrixXd X(model.input_dim(), nd);
        for (long j = 0; j < nd; ++j) {
            const int row = sample_from_cdf(prior, rng);
            target_rows[j] = row;
            X.col(j) = model.draw(task.class_ids[row], rng);
        }
        const Eigen::MatrixXd logits = classifier.W_mu * enc.apply_batch(X);
        for (long j = 0; j < nd; ++j)
            acc.add(cross_entropy_from_logits(logits.col(j), target_rows[j]));
        remaining -= nd;
    }
    return acc.estimate();
}

namespace {

struct LabeledEmbeddings {
    Eigen::MatrixXd E;        // d x n
    std::vector<int> rows;    // target row per column
};

LabeledEmbeddings sample_task_embeddings(const Encoder& enc, const ClassSampler& model,
                                         const Task& task, long n, Rng& rng) {
    const Eigen::VectorXd prior = task_conditional_prior(model, task);
    LabeledEmbeddings out;
    out.E.resize(enc.output_dim(), n);
    out.rows.resize(n);
    long done = 0;
    while (done < n) {
        const long nd = std::min(kMaxBatchColumns, n - done);
        Eigen::MatrixXd X(model.input_dim(), nd);
        for (long j = 0; j < nd; ++j) {
            const int row = sample_from_cdf(prior, rng);
            out.rows[done + j] = row;
            X.col(j) = model.draw(task.class_ids[row], rng);
        }
        out.E.middleCols(done, nd) = enc.apply_batch(X);
        done += nd;
    }
    return out;
}

double mean_cross_entropy(const Eigen::MatrixXd& W, const LabeledEmbeddings& data) {
    const Eigen::MatrixXd S = W * data.E;
    double total = 0.0;
    for (Eigen::Index j = 0; j < S.cols(); ++j)
        total += cross_entropy_from_logits(S.col(j), data.rows[j]);
    return total / static_cast<double>(S.cols());
}

}  // namespace

LossEstimate supervised_loss_opt(const Encoder& enc, const ClassSampler& model, const Task& task,
                                 const OptBudget& budget, Rng& rng) {
    if (budget.n_train < 1 || budget.max_steps < 1 || budget.n_mc < 1)
        throw std::invalid_argument("supervised_loss_opt: all budgets must be >= 1");

    const LabeledEmbeddings train = sample_task_embeddings(enc, model, task, budget.n_train, rng);

    // Fixed step below 1/L for the multinomial cross-entropy, whose
    // curvature w.r.t. W is at most max_j ||e_j||^2 / 2.
    const double max_sq = std::max(train.E.colwise().squaredNorm().maxCoeff(), 1e-12);
    const double lr = 1.8 / max_sq;

    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(task.ways(), enc.output_dim());
    double prev_loss = mean_cross_entropy(W, train);
    int rising_checks = 0;
    for (int step = 0; step < budget.max_steps; ++step) {
        const Eigen::MatrixXd S = W * train.E;
        Eigen::MatrixXd P(S.rows(), S.cols());
        for (Eigen::Index j = 0; j < S.cols(); ++j) {
            const double z = lse({S.col(j).data(), static_cast<std::size_t>(S.rows())});
            P.col(j) = (S.col(j).array() - z).exp();
            P(train.rows[j], j) -= 1.0;
        }
        W -= (lr / static_cast<double>(train.E.cols())) * (P * train.E.transpose());

        const double loss = mean_cross_entropy(W, train);
        rising_checks = loss > prev_loss ? rising_checks + 1 : 0;
        if (rising_checks >= 10)
            throw std::runtime_error(
                "supervised_loss_opt: diverged (training loss rose for 10 consecutive checks)");
        prev_loss = loss;
    }

    const LabeledEmbeddings eval = sample_task_embeddings(enc, model, task, budget.n_mc, rng);
    const Eigen::MatrixXd S = W * eval.E;
    MeanVarAccumulator acc;
    for (Eigen::Index j = 0; j < S.cols(); ++j)
        acc.add(cross_entropy_from_logits(S.col(j), eval.rows[j]));
    return acc.estimate();
}

AveragedLosses averaged_supervised_losses(const Encoder& enc, const ClassSampler& model, int k,
                                          const TaskAverageBudget& budget, Rng& rng) {
    if (budget.n_tasks < 1)
        throw std::invalid_argument("averaged_supervised_losses: need n_tasks >= 1");
    if (!model.rho_is_uniform())
        throw std::invalid_argument("averaged_supervised_losses: requires a uniform prior");
    MeanVarAccumulator acc_opt;
    MeanVarAccumulator acc_mu;
    for (int t = 0; t < budget.n_tasks; ++t) {
        const Task task = sample_task(model, k, rng);
        const MeanClassifier mc = mean_classifier(enc, model, task, budget.n_per_class, rng);
        acc_mu.add(supervised_loss_mu(enc, model, task, mc, budget.n_mc, rng).value);
        acc_opt.add(supervised_loss_opt(enc, model, task, budget.opt, rng).value);
    }
    return {acc_opt.estimate(), acc_mu.estimate()};
}

LossEstimate averaged_mu_loss(const Encoder& enc, const ClassSampler& model, int k, int n_tasks,
                              long n_per_class, long n_mc, Rng& rng) {
    if (n_tasks < 1) throw std::invalid_argument("averaged_mu_loss: need n_tasks >= 1");
    if (!model.rho_is_uniform())
        throw std::invalid_argument("averaged_mu_loss: requires a uniform prior");
    MeanVarAccumulator acc;
    for (int t = 0; t < n_tasks; ++t) {
        const Task task = sample_task(model, k, rng);
        const MeanClassifier mc = mean_classifier(enc, model, task, n_per_class, rng);
        acc.add(supervised_loss_mu(enc, model, task, mc, n_mc, rng).value);
    }
    return acc.estimate();
}

EmpiricalObjective empirical_objective(const Encoder& enc, const TripletDataset& data) {
    EmpiricalObjective out;
    const Eigen::MatrixXd Y = enc.apply_batch(data.member_matrix());
    out.per_triplet.reserve(data.size());
    out.loss_vectors.reserve(data.size());
    for (int i = 0; i < data.size(); ++i) {
        TripletEmbedding z{Y.col(3 * i), Y.col(3 * i + 1), Y.col(3 * i + 2)};
        out.per_triplet.push_back(triplet_loss(z));
        out.total += out.per_triplet.back();
        out.loss_vectors.push_back(triplet_loss_grad(z));
    }
    return out;
}

}  // namespace cbl
