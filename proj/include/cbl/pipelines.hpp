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

#include <string>
#include <vector>

#include "cbl/config.hpp"
#include "cbl/encoder.hpp"
#include "cbl/latent_model.hpp"
#include "cbl/trainer.hpp"
#include "cbl/verifier.hpp"

namespace cbl {

/// Every pipeline is a pure function of (config, seed): rerunning with the
/// same inputs writes byte-identical artifacts.

inline constexpr int kFigureRuns = 5;

/// One logged point of a bound-curve pipeline.
struct BoundCurveRow {
    int step = 0;
    int run_id = 0;
    double l_un = 0.0;
    double l_un_ci = 0.0;
    double l_sup_mu = 0.0;
    double l_sup_mu_ci = 0.0;
    double rhs_full = 0.0;
    double rhs_stripped = 0.0;
    bool holds = false;
};

struct FigureResult {
    std::vector<std::string> run_csv_paths;
    std::string mean_csv_path;
    std::string svg_path;
    std::string summary_json_path;
    std::vector<std::vector<BoundCurveRow>> runs;
    bool all_hold = true;
};

/// Five seeded training runs; at each eval stride records the
/// single-negative contrastive loss, the mean-classifier loss over all
/// classes, and the 1/p_min bound with and without its additive term.
FigureResult run_figure1(const ExperimentConfig& cfg);

/// Same pipeline with n_negatives negatives and the exact coverage
/// probability in the bound.
FigureResult run_figure2(const ExperimentConfig& cfg, long n_negatives);

struct Figure3Result {
    std::vector<std::string> run_csv_paths;
    std::string svg_path;
    std::string summary_json_path;
    std::vector<std::vector<TraceRow>> runs;
    double empirical_eta = 0.0;  // trajectory minimum of the min-norm curve
    bool norm_positivity_violated = false;
};

/// Five runs tracking min/max embedding norms over the dataset at every
/// step. zero_b_control forces B = 0 at initialization (negative control:
/// the norm corridor assumption must be flagged as violated).
Figure3Result run_figure3(const ExperimentConfig& cfg, bool zero_b_control = false);

struct GenDataResult {
    std::string dataset_path;
    double delta = 0.0;
};

GenDataResult run_gen_data(const ExperimentConfig& cfg);

struct TrainRunResult {
    std::string trace_csv_path;
    std::string checkpoint_path;
    bool reached_target = false;
    double final_objective = 0.0;
};

TrainRunResult run_train(const ExperimentConfig& cfg);

struct CouponResult {
    std::string csv_path;
    std::string json_path;
    bool all_within = true;
};

/// Exact vs Monte Carlo coverage for every N in verify.n_list plus the
/// collector stopping-time statistics and Chebyshev tails.
CouponResult run_coupon(const ExperimentConfig& cfg);

struct SmoothnessResult {
    std::string json_path;
    std::vector<QuadraticBoundReport> quadratic;
    long hessian_points = 0;
    long hessian_failures = 0;
    double worst_hessian_margin = 0.0;  // max numeric_norm - bound over points
    bool all_hold = true;
};

/// Quadratic-bound probes at C in {0.5, 1, 2} plus numeric-Hessian spectral
/// norm checks, at the configured output dimension (d <= 8 for the Hessian).
SmoothnessResult run_smoothness(const ExperimentConfig& cfg, long n_probes = 100000,
                                int hessian_points_per_c = 200);

struct VerifyResult {
    std::string json_path;
    std::vector<InequalityReport> reports;
    bool all_asserted_hold = true;
};

/// Full verifier battery on a checkpoint: the checks named in
/// verify.checks, with the model and dataset rebuilt from the config seed.
VerifyResult run_verify(const ExperimentConfig& cfg, const std::string& checkpoint_path);

/// Deterministic per-purpose stream indices shared by all pipelines.
namespace streams {
inline constexpr std::uint64_t kModel = 1;
inline constexpr std::uint64_t kDataset = 100;  // + run index
inline constexpr std::uint64_t kInit = 200;     // + run index
inline constexpr std::uint64_t kEval = 300;     // + run index
inline constexpr std::uint64_t kCoupon = 500;
inline constexpr std::uint64_t kSmoothness = 600;
inline constexpr std::uint64_t kVerify = 700;
}  // namespace streams

}  // namespace cbl
