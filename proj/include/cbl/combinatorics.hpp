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
#include <span>
#include <vector>

#include "cbl/losses.hpp"
#include "cbl/rng.hpp"

namespace cbl {

/// n-th harmonic number, summed smallest-first.
double harmonic(long n);

bool is_uniform_prior(const Eigen::VectorXd& rho, double tol = 1e-12);

/// Probability that N i.i.d. rho-draws cover every class at least once.
/// Uniform priors use the single-sum specialization at any size; general
/// priors use inclusion-exclusion over subsets and are capped at 25 classes
/// (use coupon_coverage_mc beyond that).
double coupon_coverage_exact(const Eigen::VectorXd& rho, long n_draws);

/// The two exact routes individually, for cross-validation. The subset sum
/// works for any prior up to 25 classes; the single sum requires uniform.
double coupon_coverage_subset_sum(const Eigen::VectorXd& rho, long n_draws);
double coupon_coverage_uniform_sum(int n_classes, long n_draws);

/// Monte Carlo coverage frequency with a binomial confidence interval.
LossEstimate coupon_coverage_mc(const Eigen::VectorXd& rho, long n_draws, long n_trials,
                                Rng& rng);

/// Probability that N independent rho-draws all equal an independent
/// rho-draw: sum_c rho(c)^(N+1).
double collision_prob(const Eigen::VectorXd& rho, long n_draws);

/// The probabilistic constants consumed by the inequality checks.
struct BoundConstants {
    double p_min = 0.0;     // min_c rho(c)
    double p_cc = 0.0;      // coverage probability after n_draws draws
    double tau_plus = 0.0;  // sum_c rho(c)^(n_draws+1)
    long n_draws = 0;
    int n_classes = 0;
};

BoundConstants bound_constants(const Eigen::VectorXd& rho, long n_draws);

/// Default "large enough N" marker for coverage-based bounds:
/// ceil(N_C * H_{N_C}) + N_C.
long coverage_draw_heuristic(int n_classes);

struct TailEntry {
    double beta = 0.0;
    double frequency = 0.0;        // observed P(|T - K H_K| >= beta K)
    double chebyshev_bound = 0.0;  // pi^2 / (6 beta^2)
    double slack = 0.0;            // 3 sigma binomial allowance at the bound
    bool within = false;
};

struct CollectorStats {
    double sample_mean = 0.0;
    double sample_variance = 0.0;
    double expected_mean = 0.0;        // K * H_K
    double chebyshev_variance = 0.0;   // (K pi)^2 / 6
    long n_trials = 0;
    std::vector<TailEntry> tails;
};

/// Simulates the uniform coupon-collector stopping time T (draws until all
/// classes are seen) and checks the Chebyshev tail at each requested beta.
CollectorStats collector_stopping_stats(int n_classes, long n_trials,
                                        std::span<const double> betas, Rng& rng);

}  // namespace cbl
