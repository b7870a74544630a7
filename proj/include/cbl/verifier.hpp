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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cbl/combinatorics.hpp"
#include "cbl/encoder.hpp"
#include "cbl/latent_model.hpp"
#include "cbl/losses.hpp"

namespace cbl {

/// One side of an inequality check: a Monte Carlo estimate or an exact
/// scalar (ci = 0).
struct CheckValue {
    double value = 0.0;
    double ci = 0.0;
};

/// Outcome of one certified inequality. `holds` is recomputable from the
/// stored fields: lhs.value <= rhs.value + slack, slack = lhs.ci + rhs.ci.
/// The stripped variant (bound with its additive/multiplicative correction
/// removed) is reported but never asserted.
struct InequalityReport {
    std::string name;  // lemma31 | lemma32 | prop33_n1 | prop33_nN | smooth | lemma42
    CheckValue lhs;
    CheckValue rhs;
    double slack = 0.0;
    bool holds = false;
    std::optional<double> rhs_stripped;
    std::optional<bool> holds_stripped;
    bool precondition_met = true;
    std::map<std::string, double> context;

    static bool recompute_holds(const CheckValue& lhs, const CheckValue& rhs, double slack) {
        return lhs.value <= rhs.value + slack;
    }
};

std::string report_to_json(const InequalityReport& report);
std::string reports_to_json(const std::vector<InequalityReport>& reports);

struct VerifyBudget {
    long n_mc = 2000;
    long n_per_class = 500;
    int n_tasks = 20;
};

/// Report builders: pure functions of the estimates and the prior, so that
/// `holds` is always recomputable and pipelines can reuse their own
/// estimates. The check_* operations below estimate and then delegate here.
InequalityReport lemma31_report(const LossEstimate& sup_mu, const LossEstimate& l_un,
                                const Eigen::VectorXd& rho);
InequalityReport lemma32_report(const LossEstimate& sup_mu, const LossEstimate& l_un_n,
                                const Eigen::VectorXd& rho, long n_negatives);
InequalityReport prop33_report(const LossEstimate& avg_sup_mu_nat, const LossEstimate& l_un_nat,
                               const Eigen::VectorXd& rho, int k, long n_negatives);

/// Mean-classifier loss over the full class set against the single-negative
/// contrastive loss scaled by 1/p_min plus log N_C.
InequalityReport check_lemma31(const Encoder& enc, const ClassSampler& model,
                               const VerifyBudget& budget, Rng& rng);

/// Same left side against the N-negative contrastive loss scaled by the
/// exact coupon-coverage probability. Requires N >= N_C (coverage would be
/// zero below that and the bound vacuous).
InequalityReport check_lemma32(const Encoder& enc, const ClassSampler& model, long n_negatives,
                               const VerifyBudget& budget, Rng& rng);

/// Task-averaged mean-classifier loss against the collision-corrected
/// contrastive bound. The single-negative case is evaluated in base-2
/// logarithms, the general case in natural logarithms; the base is recorded
/// in the report context.
InequalityReport check_prop33(const Encoder& enc, const ClassSampler& model, int k,
                              long n_negatives, const VerifyBudget& budget, Rng& rng);

struct QuadraticBoundReport {
    int dim = 0;
    double c_bound = 0.0;
    double smooth_constant = 0.0;  // 2 + 8 C^2
    long n_probes = 0;
    long violations = 0;
    double max_ratio = 0.0;   // worst observed curvature / bound
    double max_excess = 0.0;  // worst observed lhs - (linear + quadratic)
    double tolerance = 1e-9;
    bool holds = false;
};

/// Probes the quadratic upper bound
///   loss(z + z') <= loss(z) + <grad(z), z'> + (2 + 8 C^2)/2 ||z'||^2
/// with both endpoints in the radius-C block ball.
QuadraticBoundReport check_quadratic_bound(int dim, double c_bound, long n_probes, Rng& rng);

/// InequalityReport view of a probe run: lhs is the worst probe excess, rhs
/// is zero at tolerance slack.
InequalityReport smooth_report(const QuadraticBoundReport& report);

/// Triplet embedding with every block in the radius-c ball.
TripletEmbedding sample_block_ball(int dim, double c_bound, Rng& rng);

struct HessianCheck {
    double numeric_norm = 0.0;
    double bound = 0.0;  // 2 + 8 max_{i,j} ||z_i|| ||z_j||
    double max_asymmetry = 0.0;
    bool holds = false;
};

/// Dense numeric Hessian of the triplet loss (central differences of the
/// analytic gradient, step 1e-4) against the closed-form norm bound.
/// Requires output dimension <= 8.
HessianCheck hessian_norm_check(const TripletEmbedding& z);

/// Per-triplet state needed by the small-gradient loss bound.
struct TripletPointData {
    std::vector<double> losses;
    std::vector<std::array<double, 3>> loss_vector_norms;
    std::vector<std::array<double, 3>> member_norms;

    double max_loss_vector_norm() const;
    double min_member_norm() const;
};

TripletPointData collect_triplet_point(const Encoder& enc, const TripletDataset& data);

/// With eps = max block norm of the loss vectors: if eps < eta/2 and every
/// embedding norm is >= eta, every per-triplet loss must satisfy
/// loss <= 2 eps / eta. Precondition failures are reported, not asserted.
InequalityReport check_lemma42(const TripletPointData& point, double eta);

}  // namespace cbl
