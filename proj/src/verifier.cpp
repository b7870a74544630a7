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

#include "cbl/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace cbl {

namespace {

constexpr double kLn2 = 0.6931471805599453;

nlohmann::json report_json(const InequalityReport& r) {
    nlohmann::json j;
    j["name"] = r.name;
    j["lhs"] = {{"value", r.lhs.value}, {"ci", r.lhs.ci}};
    j["rhs"] = {{"value", r.rhs.value}, {"ci", r.rhs.ci}};
    j["slack"] = r.slack;
    j["holds"] = r.holds;
    if (r.rhs_stripped) j["rhs_stripped"] = *r.rhs_stripped;
    if (r.holds_stripped) j["holds_stripped"] = *r.holds_stripped;
    j["precondition_met"] = r.precondition_met;
    j["context"] = r.context;
    return j;
}

InequalityReport make_report(std::string name, CheckValue lhs, CheckValue rhs) {
    InequalityReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.slack = lhs.ci + rhs.ci;
    r.holds = InequalityReport::recompute_holds(lhs, rhs, r.slack);
    return r;
}

TripletEmbedding embedding_from_flat(const Eigen::VectorXd& flat, int dim) {
    return {flat.segment(0, dim), flat.segment(dim, dim), flat.segment(2 * dim, dim)};
}

/// Uniform point in the radius-c ball of the given dimension.
Eigen::VectorXd ball_point(int dim, double radius, Rng& rng) {
    Eigen::VectorXd v(dim);
    double norm = 0.0;
    do {
        for (int i = 0; i < dim; ++i) v[i] = rng.normal();
        norm = v.norm();
    } while (norm < 1e-12);
    const double r = radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(dim));
    return v * (r / norm);
}

Eigen::VectorXd block_ball_point(int dim, double radius, Rng& rng) {
    Eigen::VectorXd z(3 * dim);
    for (int j = 0; j < 3; ++j) z.segment(j * dim, dim) = ball_point(dim, radius, rng);
    return z;
}

}  // namespace

std::string report_to_json(const InequalityReport& report) {
    return report_json(report).dump(2);
}

std::string reports_to_json(const std::vector<InequalityReport>& reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    return arr.dump(2);
}

InequalityReport lemma31_report(const LossEstimate& sup_mu, const LossEstimate& l_un,
                                const Eigen::VectorXd& rho) {
    const double p_min = rho.minCoeff();
    const double log_nc = std::log(static_cast<double>(rho.size()));
    const CheckValue rhs{l_un.value / p_min + log_nc, l_un.ci_half_width / p_min};

    InequalityReport r = make_report("lemma31", {sup_mu.value, sup_mu.ci_half_width}, rhs);
    r.rhs_stripped = rhs.value - log_nc;
    r.holds_stripped = r.lhs.value <= *r.rhs_stripped + r.slack;
    r.context["p_min"] = p_min;
    r.context["n_classes"] = static_cast<double>(rho.size());
    r.context["log_n_classes"] = log_nc;
    r.context["l_un"] = l_un.value;
    return r;
}

InequalityReport lemma32_report(const LossEstimate& sup_mu, const LossEstimate& l_un_n,
                                const Eigen::VectorXd& rho, long n_negatives) {
    const int n_classes = static_cast<int>(rho.size());
    if (n_negatives < n_classes)
        throw std::invalid_argument(
            "lemma32_report: coverage probability is zero for N < N_C; the bound is vacuous");
    const double p_cc = coupon_coverage_exact(rho, n_negatives);
    if (p_cc <= 0.0) throw std::invalid_argument("lemma32_report: coverage probability is zero");

    const CheckValue rhs{l_un_n.value / p_cc, l_un_n.ci_half_width / p_cc};
    InequalityReport r = make_report("lemma32", {sup_mu.value, sup_mu.ci_half_width}, rhs);
    r.rhs_stripped = l_un_n.value;  // bound without the 1/p_cc factor
    r.holds_stripped =
        r.lhs.value <= *r.rhs_stripped + (sup_mu.ci_half_width + l_un_n.ci_half_width);
    r.context["p_cc"] = p_cc;
    r.context["n_negatives"] = static_cast<double>(n_negatives);
    r.context["n_classes"] = n_classes;
    const long heuristic = coverage_draw_heuristic(n_classes);
    r.context["large_n_default"] = static_cast<double>(heuristic);
    r.context["meets_large_n_default"] = n_negatives >= heuristic ? 1.0 : 0.0;
    return r;
}

InequalityReport prop33_report(const LossEstimate& avg_sup_mu_nat, const LossEstimate& l_un_nat,
                               const Eigen::VectorXd& rho, int k, long n_negatives) {
    if (!is_uniform_prior(rho))
        throw std::invalid_argument("prop33_report: requires a uniform prior");
    if (k < 1 || k > static_cast<int>(rho.size()) - 1)
        throw std::invalid_argument("prop33_report: need 1 <= k <= n_classes - 1");
    if (n_negatives < 1) throw std::invalid_argument("prop33_report: need n_negatives >= 1");

    const double tau = collision_prob(rho, n_negatives);
    const double multiplier = static_cast<double>(k) / (1.0 - tau);

    InequalityReport r;
    if (n_negatives == 1) {
        // Single-negative restated form, evaluated in base-2 logarithms.
        const CheckValue lhs{avg_sup_mu_nat.value / kLn2, avg_sup_mu_nat.ci_half_width / kLn2};
        const double l_un2 = l_un_nat.value / kLn2;
        const CheckValue rhs{multiplier * (l_un2 - tau),
                             multiplier * (l_un_nat.ci_half_width / kLn2)};
        r = make_report("prop33_n1", lhs, rhs);
        r.rhs_stripped = l_un2;
        r.context["log2"] = 1.0;
        r.context["l_un"] = l_un2;
    } else {
        const CheckValue lhs{avg_sup_mu_nat.value, avg_sup_mu_nat.ci_half_width};
        const double correction = tau * std::log(static_cast<double>(n_negatives + 1));
        const CheckValue rhs{multiplier * (l_un_nat.value - correction),
                             multiplier * l_un_nat.ci_half_width};
        r = make_report("prop33_nN", lhs, rhs);
        r.rhs_stripped = l_un_nat.value;
        r.context["log2"] = 0.0;
        r.context["l_un"] = l_un_nat.value;
    }
    r.holds_stripped = r.lhs.value <= *r.rhs_stripped + r.slack;
    r.context["tau_plus"] = tau;
    r.context["k"] = k;
    r.context["n_negatives"] = static_cast<double>(n_negatives);
    r.context["n_classes"] = static_cast<double>(rho.size());
    r.context["multiplier"] = multiplier;
    return r;
}

InequalityReport check_lemma31(const Encoder& enc, const ClassSampler& model,
                               const VerifyBudget& budget, Rng& rng) {
    const Task task = full_task(model);
    const MeanClassifier mc = mean_classifier(enc, model, task, budget.n_per_class, rng);
    const LossEstimate lhs = supervised_loss_mu(enc, model, task, mc, budget.n_mc, rng);
    const LossEstimate l_un = unsupervised_loss(enc, model, 1, budget.n_mc, rng);
    return lemma31_report(lhs, l_un, model.rho());
}

InequalityReport check_lemma32(const Encoder& enc, const ClassSampler& model, long n_negatives,
                               const VerifyBudget& budget, Rng& rng) {
    if (n_negatives < model.n_classes())
        throw std::invalid_argument(
            "check_lemma32: coverage probability is zero for N < N_C; the bound is vacuous");
    const Task task = full_task(model);
    const MeanClassifier mc = mean_classifier(enc, model, task, budget.n_per_class, rng);
    const LossEstimate lhs = supervised_loss_mu(enc, model, task, mc, budget.n_mc, rng);
    const LossEstimate l_un =
        unsupervised_loss(enc, model, static_cast<int>(n_negatives), budget.n_mc, rng);
    return lemma32_report(lhs, l_un, model.rho(), n_negatives);
}

InequalityReport check_prop33(const Encoder& enc, const ClassSampler& model, int k,
                              long n_negatives, const VerifyBudget& budget, Rng& rng) {
    if (!model.rho_is_uniform())
        throw std::invalid_argument("check_prop33: requires a uniform prior");
    if (k < 1 || k > model.n_classes() - 1)
        throw std::invalid_argument("check_prop33: need 1 <= k <= n_classes - 1");
    if (n_negatives < 1) throw std::invalid_argument("check_prop33: need n_negatives >= 1");

    const LossEstimate lhs_nat = averaged_mu_loss(enc, model, k, budget.n_tasks,
                                                  budget.n_per_class, budget.n_mc, rng);
    const LossEstimate l_un_nat =
        unsupervised_loss(enc, model, static_cast<int>(n_negatives), budget.n_mc, rng);
    return prop33_report(lhs_nat, l_un_nat, model.rho(), k, n_negatives);
}

TripletEmbedding sample_block_ball(int dim, double c_bound, Rng& rng) {
    return embedding_from_flat(block_ball_point(dim, c_bound, rng), dim);
}

QuadraticBoundReport check_quadratic_bound(int dim, double c_bound, long n_probes, Rng& rng) {
    if (dim < 1) throw std::invalid_argument("check_quadratic_bound: dim must be >= 1");
    if (c_bound <= 0.0) throw std::invalid_argument("check_quadratic_bound: c_bound must be > 0");
    if (n_probes < 1) throw std::invalid_argument("check_quadratic_bound: n_probes must be >= 1");

    QuadraticBoundReport report;
    report.dim = dim;
    report.c_bound = c_bound;
    report.smooth_constant = 2.0 + 8.0 * c_bound * c_bound;
    report.n_probes = n_probes;
    report.max_excess = -std::numeric_limits<double>::infinity();

    for (long p = 0; p < n_probes; ++p) {
        const Eigen::VectorXd z_flat = block_ball_point(dim, c_bound, rng);
        const Eigen::VectorXd w_flat = block_ball_point(dim, c_bound, rng);
        const Eigen::VectorXd step = w_flat - z_flat;

        const TripletEmbedding z = embedding_from_flat(z_flat, dim);
        const TripletEmbedding z_step = embedding_from_flat(w_flat, dim);
        const double lhs = triplet_loss(z_step);
        const double linear = triplet_loss(z) + triplet_loss_grad(z).flat().dot(step);
        const double quad = 0.5 * report.smooth_constant * step.squaredNorm();

        if (lhs > linear + quad + report.tolerance) ++report.violations;
        report.max_excess = std::max(report.max_excess, lhs - linear - quad);
        if (quad > 0.0) report.max_ratio = std::max(report.max_ratio, (lhs - linear) / quad);
    }
    report.holds = report.violations == 0;
    return report;
}

InequalityReport smooth_report(const QuadraticBoundReport& probe) {
    InequalityReport r;
    r.name = "smooth";
    r.lhs = {probe.max_excess, 0.0};
    r.rhs = {0.0, 0.0};
    r.slack = probe.tolerance;
    r.holds = InequalityReport::recompute_holds(r.lhs, r.rhs, r.slack);
    r.context["c_bound"] = probe.c_bound;
    r.context["smooth_constant"] = probe.smooth_constant;
    r.context["n_probes"] = static_cast<double>(probe.n_probes);
    r.context["violations"] = static_cast<double>(probe.violations);
    r.context["max_ratio"] = probe.max_ratio;
    r.context["dim"] = probe.dim;
    return r;
}

HessianCheck hessian_norm_check(const TripletEmbedding& z) {
    const int dim = static_cast<int>(z.z1.size());
    if (dim > 8)
        throw std::invalid_argument("hessian_norm_check: dense Hessian limited to dim <= 8");

    const int n = 3 * dim;
    Eigen::VectorXd flat(n);
    flat << z.z1, z.z2, z.z3;

    // First-order central differences of the exact gradient: one order less
    // cancellation than second differences of the loss.
    constexpr double kStep = 1e-4;
    Eigen::MatrixXd hess(n, n);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd hi = flat;
        Eigen::VectorXd lo = flat;
        hi[i] += kStep;
        lo[i] -= kStep;
        const Eigen::VectorXd g_hi = triplet_loss_grad(embedding_from_flat(hi, dim)).flat();
        const Eigen::VectorXd g_lo = triplet_loss_grad(embedding_from_flat(lo, dim)).flat();
        hess.col(i) = (g_hi - g_lo) / (2.0 * kStep);
    }

    HessianCheck check;
    check.max_asymmetry = (hess - hess.transpose()).cwiseAbs().maxCoeff();

    const Eigen::MatrixXd sym = 0.5 * (hess + hess.transpose());
    Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double norm_estimate = 0.0;
    for (int it = 0; it < 500; ++it) {
        const Eigen::VectorXd hv = sym * v;
        const double mag = hv.norm();
        if (mag < 1e-300) break;
        v = hv / mag;
        if (std::abs(mag - norm_estimate) <= 1e-13 * std::max(1.0, mag)) {
            norm_estimate = mag;
            break;
        }
        norm_estimate = mag;
    }
    check.numeric_norm = norm_estimate;

    const double norms[3] = {z.z1.norm(), z.z2.norm(), z.z3.norm()};
    double max_product = 0.0;
    for (double a : norms)
        for (double b : norms) max_product = std::max(max_product, a * b);
    check.bound = 2.0 + 8.0 * max_product;
    check.holds = check.numeric_norm <= check.bound + 1e-6 * (1.0 + check.bound);
    return check;
}

double TripletPointData::max_loss_vector_norm() const {
    double best = 0.0;
    for (const auto& norms : loss_vector_norms)
        best = std::max({best, norms[0], norms[1], norms[2]});
    return best;
}

double TripletPointData::min_member_norm() const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& norms : member_norms)
        best = std::min({best, norms[0], norms[1], norms[2]});
    return best;
}

TripletPointData collect_triplet_point(const Encoder& enc, const TripletDataset& data) {
    const EmpiricalObjective obj = empirical_objective(enc, data);
    const Eigen::MatrixXd Y = enc.apply_batch(data.member_matrix());

    TripletPointData point;
    point.losses = obj.per_triplet;
    point.loss_vector_norms.reserve(data.size());
    point.member_norms.reserve(data.size());
    for (int i = 0; i < data.size(); ++i) {
        const auto& g = obj.loss_vectors[i];
        point.loss_vector_norms.push_back({g.g1.norm(), g.g2.norm(), g.g3.norm()});
        point.member_norms.push_back(
            {Y.col(3 * i).norm(), Y.col(3 * i + 1).norm(), Y.col(3 * i + 2).norm()});
    }
    return point;
}

InequalityReport check_lemma42(const TripletPointData& point, double eta) {
    if (eta <= 0.0) throw std::invalid_argument("check_lemma42: eta must be > 0");
    if (point.losses.empty()) throw std::invalid_argument("check_lemma42: empty point data");

    const double eps = point.max_loss_vector_norm();
    const double min_norm = point.min_member_norm();
    const double max_loss = *std::max_element(point.losses.begin(), point.losses.end());

    InequalityReport r;
    r.name = "lemma42";
    r.lhs = {max_loss, 0.0};
    r.rhs = {2.0 * eps / eta, 0.0};
    r.slack = 1e-9;
    r.precondition_met = eps < eta / 2.0 && min_norm >= eta;
    r.holds = r.precondition_met
                  ? InequalityReport::recompute_holds(r.lhs, r.rhs, r.slack)
                  : false;
    r.context["epsilon"] = eps;
    r.context["eta"] = eta;
    r.context["min_member_norm"] = min_norm;
    r.context["max_per_triplet_loss"] = max_loss;
    return r;
}

}  // namespace cbl
