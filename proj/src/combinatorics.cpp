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

#include "cbl/combinatorics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbl {

namespace {

constexpr double kPi = 3.14159265358979323846;

void validate_prior(const Eigen::VectorXd& rho) {
    if (rho.size() < 1) throw std::invalid_argument("prior must be nonempty");
    if (rho.minCoeff() <= 0.0)
        throw std::invalid_argument("prior entries must be strictly positive");
    if (std::abs(rho.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("prior must sum to 1 within 1e-12");
}

/// Alternating inclusion-exclusion sums cancel heavily; Kahan compensation
/// keeps the surviving digits.
class KahanSum {
  public:
    void add(double x) {
        const double y = x - compensation_;
        const double t = sum_ + y;
        compensation_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

  private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

int draw_class(const Eigen::VectorXd& rho, Rng& rng) {
    double u = rng.uniform01();
    for (int c = 0; c < rho.size(); ++c) {
        u -= rho[c];
        if (u < 0.0) return c;
    }
    return static_cast<int>(rho.size()) - 1;
}

}  // namespace

double harmonic(long n) {
    if (n < 1) throw std::invalid_argument("harmonic: n must be >= 1");
    double sum = 0.0;
    for (long i = n; i >= 1; --i) sum += 1.0 / static_cast<double>(i);
    return sum;
}

bool is_uniform_prior(const Eigen::VectorXd& rho, double tol) {
    const double u = 1.0 / static_cast<double>(rho.size());
    return ((rho.array() - u).abs() <= tol).all();
}

double coupon_coverage_uniform_sum(int n_classes, long n_draws) {
    if (n_classes < 1)
        throw std::invalid_argument("coupon_coverage_uniform_sum: n_classes must be >= 1");
    if (n_draws < n_classes) return 0.0;
    if (n_classes == 1) return 1.0;
    // sum_j (-1)^j C(K, j) (1 - j/K)^N, binomials by multiplicative
    // recurrence; valid at any K.
    KahanSum sum;
    double binom = 1.0;
    for (int j = 0; j <= n_classes; ++j) {
        if (j > 0) binom *= static_cast<double>(n_classes - j + 1) / static_cast<double>(j);
        const double base = 1.0 - static_cast<double>(j) / static_cast<double>(n_classes);
        const double term = binom * std::pow(base, static_cast<double>(n_draws));
        sum.add(j % 2 == 0 ? term : -term);
    }
    return std::clamp(sum.value(), 0.0, 1.0);
}

double coupon_coverage_subset_sum(const Eigen::VectorXd& rho, long n_draws) {
    validate_prior(rho);
    const int k = static_cast<int>(rho.size());
    if (n_draws < k) return 0.0;
    if (k == 1) return 1.0;
    if (k > 25)
        throw std::invalid_argument(
            "coupon_coverage_subset_sum: inclusion-exclusion over subsets is capped at 25 "
            "classes; use the uniform specialization or coupon_coverage_mc");
    // sum over subsets S of missing classes: (-1)^|S| (1 - rho(S))^N.
    KahanSum sum;
    const std::uint64_t n_subsets = 1ULL << k;
    for (std::uint64_t mask = 0; mask < n_subsets; ++mask) {
        double mass = 0.0;
        int bits = 0;
        for (int c = 0; c < k; ++c) {
            if (mask & (1ULL << c)) {
                mass += rho[c];
                ++bits;
            }
        }
        const double term = std::pow(1.0 - mass, static_cast<double>(n_draws));
        sum.add(bits % 2 == 0 ? term : -term);
    }
    return std::clamp(sum.value(), 0.0, 1.0);
}

double coupon_coverage_exact(const Eigen::VectorXd& rho, long n_draws) {
    validate_prior(rho);
    if (n_draws < 0) throw std::invalid_argument("coupon_coverage_exact: n_draws must be >= 0");
    if (is_uniform_prior(rho))
        return coupon_coverage_uniform_sum(static_cast<int>(rho.size()), n_draws);
    if (rho.size() > 25)
        throw std::invalid_argument(
            "coupon_coverage_exact: inclusion-exclusion over subsets is capped at 25 classes "
            "for non-uniform priors; use coupon_coverage_mc");
    return coupon_coverage_subset_sum(rho, n_draws);
}

LossEstimate coupon_coverage_mc(const Eigen::VectorXd& rho, long n_draws, long n_trials,
                                Rng& rng) {
    validate_prior(rho);
    if (n_trials < 1) throw std::invalid_argument("coupon_coverage_mc: n_trials must be >= 1");
    const int k = static_cast<int>(rho.size());
    MeanVarAccumulator acc;
    std::vector<char> seen(k);
    for (long t = 0; t < n_trials; ++t) {
        std::fill(seen.begin(), seen.end(), 0);
        int distinct = 0;
        for (long i = 0; i < n_draws && distinct < k; ++i) {
            const int c = draw_class(rho, rng);
            if (!seen[c]) {
                seen[c] = 1;
                ++distinct;
            }
        }
        acc.add(distinct == k ? 1.0 : 0.0);
    }
    return acc.estimate();
}

double collision_prob(const Eigen::VectorXd& rho, long n_draws) {
    validate_prior(rho);
    if (n_draws < 1) throw std::invalid_argument("collision_prob: n_draws must be >= 1");
    double sum = 0.0;
    for (int c = 0; c < rho.size(); ++c)
        sum += std::pow(rho[c], static_cast<double>(n_draws + 1));
    return sum;
}

BoundConstants bound_constants(const Eigen::VectorXd& rho, long n_draws) {
    validate_prior(rho);
    BoundConstants out;
    out.n_classes = static_cast<int>(rho.size());
    out.n_draws = n_draws;
    out.p_min = rho.minCoeff();
    out.p_cc = coupon_coverage_exact(rho, n_draws);
    out.tau_plus = collision_prob(rho, n_draws);
    return out;
}

long coverage_draw_heuristic(int n_classes) {
    return static_cast<long>(std::ceil(n_classes * harmonic(n_classes))) + n_classes;
}

CollectorStats collector_stopping_stats(int n_classes, long n_trials,
                                        std::span<const double> betas, Rng& rng) {
    if (n_classes < 1)
        throw std::invalid_argument("collector_stopping_stats: n_classes must be >= 1");
    if (n_trials < 100)
        throw std::invalid_argument("collector_stopping_stats: n_trials must be >= 100");

    CollectorStats stats;
    stats.n_trials = n_trials;
    stats.expected_mean = n_classes * harmonic(n_classes);
    stats.chebyshev_variance = (n_classes * kPi) * (n_classes * kPi) / 6.0;

    MeanVarAccumulator acc;
    std::vector<long> exceed_counts(betas.size(), 0);
    std::vector<char> seen(n_classes);
    for (long t = 0; t < n_trials; ++t) {
        std::fill(seen.begin(), seen.end(), 0);
        int distinct = 0;
        long draws = 0;
        while (distinct < n_classes) {
            const int c = static_cast<int>(rng.uniform_int(n_classes));
            ++draws;
            if (!seen[c]) {
                seen[c] = 1;
                ++distinct;
            }
        }
        acc.add(static_cast<double>(draws));
        const double deviation = std::abs(static_cast<double>(draws) - stats.expected_mean);
        for (std::size_t b = 0; b < betas.size(); ++b)
            if (deviation >= betas[b] * n_classes) ++exceed_counts[b];
    }
    stats.sample_mean = acc.mean();
    stats.sample_variance = acc.sample_variance();

    for (std::size_t b = 0; b < betas.size(); ++b) {
        TailEntry e;
        e.beta = betas[b];
        e.frequency = static_cast<double>(exceed_counts[b]) / static_cast<double>(n_trials);
        e.chebyshev_bound = std::min(kPi * kPi / (6.0 * betas[b] * betas[b]), 1.0);
        const double p = e.chebyshev_bound;
        e.slack = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n_trials));
        e.within = e.frequency <= e.chebyshev_bound + e.slack;
        stats.tails.push_back(e);
    }
    return stats;
}

}  // namespace cbl
