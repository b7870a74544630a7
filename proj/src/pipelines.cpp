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

#include "cbl/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cbl/combinatorics.hpp"
#include "cbl/svg.hpp"

namespace fs = std::filesystem;

namespace cbl {

namespace {

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.output.directory);
    return (fs::path(cfg.output.directory) / name).string();
}

LatentClassModel build_model(const ExperimentConfig& cfg) {
    Rng model_rng = Rng::derive(cfg.seed, streams::kModel);
    return LatentClassModel::make_synthetic(cfg.model.n_classes, cfg.model.input_dim,
                                            cfg.model.spread, model_rng, cfg.model.rho);
}

TripletDataset build_dataset(const ExperimentConfig& cfg, const LatentClassModel& model,
                             int run_id) {
    Rng data_rng = Rng::derive(cfg.seed, streams::kDataset + run_id);
    return build_triplet_dataset(model, cfg.dataset.n, cfg.dataset.augment_noise,
                                 cfg.dataset.min_delta, data_rng);
}

Encoder build_encoder(const ExperimentConfig& cfg, int run_id) {
    Rng init_rng = Rng::derive(cfg.seed, streams::kInit + run_id);
    return init_encoder(cfg.model.input_dim, cfg.encoder.m, cfg.encoder.L, cfg.encoder.d,
                        init_rng);
}

TrainConfig train_config(const ExperimentConfig& cfg) {
    TrainConfig tc;
    tc.learning_rate = cfg.train.learning_rate;
    tc.max_steps = cfg.train.max_steps;
    tc.target_loss = cfg.train.target_loss;
    tc.eta_monitor = cfg.train.eta_monitor;
    tc.norm_upper_monitor = cfg.train.norm_upper_monitor;
    tc.eval_every = cfg.train.eval_every;
    tc.seed = cfg.seed;
    return tc;
}

VerifyBudget verify_budget(const ExperimentConfig& cfg) {
    return {cfg.verify.n_mc, cfg.verify.n_per_class, cfg.verify.n_tasks};
}

std::string bool_cell(bool b) { return b ? "1" : "0"; }

void write_json_file(const std::string& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Shared bound-curve pipeline behind figure1 (single negative, 1/p_min bound)
// and figure2 (N negatives, 1/p_cc bound).
// ---------------------------------------------------------------------------

struct BoundPipelineSpec {
    long n_negatives = 1;
    bool use_coverage = false;
    std::string prefix;
    std::string title;
};

std::string bound_rows_csv(const std::vector<BoundCurveRow>& rows) {
    std::ostringstream out;
    out << "step,run_id,l_un,l_un_ci,l_sup_mu,l_sup_mu_ci,rhs_full,rhs_stripped,holds\n";
    for (const auto& r : rows) {
        out << r.step << "," << r.run_id << "," << format_double(r.l_un) << ","
            << format_double(r.l_un_ci) << "," << format_double(r.l_sup_mu) << ","
            << format_double(r.l_sup_mu_ci) << "," << format_double(r.rhs_full) << ","
            << format_double(r.rhs_stripped) << "," << bool_cell(r.holds) << "\n";
    }
    return out.str();
}

FigureResult run_bound_pipeline(const ExperimentConfig& cfg, const BoundPipelineSpec& spec) {
    const LatentClassModel model = build_model(cfg);
    const VerifyBudget budget = verify_budget(cfg);
    FigureResult result;

    for (int run = 0; run < kFigureRuns; ++run) {
        const TripletDataset data = build_dataset(cfg, model, run);
        Rng eval_rng = Rng::derive(cfg.seed, streams::kEval + run);

        const EvalHook hook = [&](const Encoder& snapshot, int step) {
            const Task task = full_task(model);
            const MeanClassifier mc =
                mean_classifier(snapshot, model, task, budget.n_per_class, eval_rng);
            const LossEstimate mu =
                supervised_loss_mu(snapshot, model, task, mc, budget.n_mc, eval_rng);
            const LossEstimate l_un = unsupervised_loss(
                snapshot, model, static_cast<int>(spec.n_negatives), budget.n_mc, eval_rng);
            EvalRow row;
            row.step = step;
            row.l_un = l_un;
            row.l_sup_mu = mu;
            row.reports.push_back(spec.use_coverage
                                      ? lemma32_report(mu, l_un, model.rho(), spec.n_negatives)
                                      : lemma31_report(mu, l_un, model.rho()));
            return row;
        };

        const TrainResult trained = train(build_encoder(cfg, run), data, train_config(cfg), hook);

        std::vector<BoundCurveRow> rows;
        rows.reserve(trained.trace.evals.size());
        for (const auto& eval : trained.trace.evals) {
            const InequalityReport& rep = eval.reports.front();
            BoundCurveRow row;
            row.step = eval.step;
            row.run_id = run;
            row.l_un = eval.l_un.value;
            row.l_un_ci = eval.l_un.ci_half_width;
            row.l_sup_mu = eval.l_sup_mu.value;
            row.l_sup_mu_ci = eval.l_sup_mu.ci_half_width;
            row.rhs_full = rep.rhs.value;
            row.rhs_stripped = rep.rhs_stripped.value_or(rep.rhs.value);
            row.holds = rep.holds;
            result.all_hold = result.all_hold && rep.holds;
            rows.push_back(row);
        }
        const std::string path =
            out_path(cfg, spec.prefix + "_run" + std::to_string(run) + ".csv");
        write_text_file(path, bound_rows_csv(rows));
        result.run_csv_paths.push_back(path);
        result.runs.push_back(std::move(rows));
    }

    // Mean curves over the logged points shared by all runs.
    std::size_t n_points = result.runs.front().size();
    for (const auto& rows : result.runs) n_points = std::min(n_points, rows.size());
    std::ostringstream mean_csv;
    mean_csv << "step,l_un,l_sup_mu,rhs_full,rhs_stripped\n";
    std::vector<double> mean_steps, mean_lun, mean_mu, mean_rhs;
    for (std::size_t i = 0; i < n_points; ++i) {
        double l_un = 0.0, mu = 0.0, rhs = 0.0, stripped = 0.0;
        for (const auto& rows : result.runs) {
            l_un += rows[i].l_un;
            mu += rows[i].l_sup_mu;
            rhs += rows[i].rhs_full;
            stripped += rows[i].rhs_stripped;
        }
        const double n_runs = static_cast<double>(result.runs.size());
        l_un /= n_runs;
        mu /= n_runs;
        rhs /= n_runs;
        stripped /= n_runs;
        mean_csv << result.runs.front()[i].step << "," << format_double(l_un) << ","
                 << format_double(mu) << "," << format_double(rhs) << ","
                 << format_double(stripped) << "\n";
        mean_steps.push_back(result.runs.front()[i].step);
        mean_lun.push_back(l_un);
        mean_mu.push_back(mu);
        mean_rhs.push_back(rhs);
    }
    result.mean_csv_path = out_path(cfg, spec.prefix + "_mean.csv");
    write_text_file(result.mean_csv_path, mean_csv.str());

    std::vector<Series> series;
    for (const auto& rows : result.runs) {
        Series s_un{"", {}, {}, "#aec7e8", 1.0, false};
        Series s_mu{"", {}, {}, "#ff9896", 1.0, false};
        for (const auto& r : rows) {
            s_un.x.push_back(r.step);
            s_un.y.push_back(r.l_un);
            s_mu.x.push_back(r.step);
            s_mu.y.push_back(r.l_sup_mu);
        }
        series.push_back(std::move(s_un));
        series.push_back(std::move(s_mu));
    }
    series.push_back({"unsupervised loss (mean)", mean_steps, mean_lun, "#1f77b4", 2.5, false});
    series.push_back({"mean-classifier loss (mean)", mean_steps, mean_mu, "#d62728", 2.5, false});
    series.push_back({"bound (mean)", mean_steps, mean_rhs, "#2ca02c", 2.0, true});
    SvgStyle style;
    style.title = spec.title;
    style.x_label = "step";
    style.y_label = "loss";
    result.svg_path = out_path(cfg, spec.prefix + ".svg");
    write_text_file(result.svg_path, render_svg(series, style));

    nlohmann::json summary;
    summary["pipeline"] = spec.prefix;
    summary["runs"] = kFigureRuns;
    summary["logged_points_per_run"] = result.runs.front().size();
    summary["n_negatives"] = spec.n_negatives;
    summary["all_hold"] = result.all_hold;
    if (spec.use_coverage)
        summary["p_cc_exact"] = coupon_coverage_exact(model.rho(), spec.n_negatives);
    result.summary_json_path = out_path(cfg, spec.prefix + "_summary.json");
    write_json_file(result.summary_json_path, summary);
    return result;
}

}  // namespace

FigureResult run_figure1(const ExperimentConfig& cfg) {
    BoundPipelineSpec spec;
    spec.n_negatives = 1;
    spec.use_coverage = false;
    spec.prefix = "figure1";
    spec.title = "Losses and 1/p_min bound along training";
    return run_bound_pipeline(cfg, spec);
}

FigureResult run_figure2(const ExperimentConfig& cfg, long n_negatives) {
    if (n_negatives < cfg.model.n_classes)
        throw std::invalid_argument(
            "run_figure2: n_negatives must be >= n_classes (coverage bound is vacuous below)");
    BoundPipelineSpec spec;
    spec.n_negatives = n_negatives;
    spec.use_coverage = true;
    spec.prefix = "figure2_N" + std::to_string(n_negatives);
    spec.title = "Losses and coverage bound, N = " + std::to_string(n_negatives);
    return run_bound_pipeline(cfg, spec);
}

Figure3Result run_figure3(const ExperimentConfig& cfg, bool zero_b_control) {
    const LatentClassModel model = build_model(cfg);
    Figure3Result result;
    const std::string prefix = zero_b_control ? "figure3_zero_b" : "figure3";

    for (int run = 0; run < kFigureRuns; ++run) {
        const TripletDataset data = build_dataset(cfg, model, run);
        Encoder enc = build_encoder(cfg, run);
        if (zero_b_control) enc.mutable_B().setZero();

        const TrainResult trained = train(std::move(enc), data, train_config(cfg));
        std::ostringstream csv;
        csv << "step,run_id,min_norm,max_norm\n";
        for (const auto& row : trained.trace.rows)
            csv << row.step << "," << run << "," << format_double(row.min_output_norm) << ","
                << format_double(row.max_output_norm) << "\n";
        const std::string path = out_path(cfg, prefix + "_run" + std::to_string(run) + ".csv");
        write_text_file(path, csv.str());
        result.run_csv_paths.push_back(path);
        result.runs.push_back(trained.trace.rows);
    }

    double trajectory_min = std::numeric_limits<double>::infinity();
    for (const auto& rows : result.runs)
        for (const auto& row : rows) trajectory_min = std::min(trajectory_min, row.min_output_norm);
    result.empirical_eta = trajectory_min;
    result.norm_positivity_violated = !(trajectory_min > 0.0);

    std::size_t n_points = result.runs.front().size();
    for (const auto& rows : result.runs) n_points = std::min(n_points, rows.size());
    std::vector<double> steps(n_points), mean_min(n_points, 0.0), mean_max(n_points, 0.0);
    for (std::size_t i = 0; i < n_points; ++i) {
        steps[i] = result.runs.front()[i].step;
        for (const auto& rows : result.runs) {
            mean_min[i] += rows[i].min_output_norm;
            mean_max[i] += rows[i].max_output_norm;
        }
        mean_min[i] /= static_cast<double>(result.runs.size());
        mean_max[i] /= static_cast<double>(result.runs.size());
    }

    std::vector<Series> series;
    for (const auto& rows : result.runs) {
        Series s_min{"", {}, {}, "#aec7e8", 1.0, false};
        Series s_max{"", {}, {}, "#ff9896", 1.0, false};
        for (const auto& r : rows) {
            s_min.x.push_back(r.step);
            s_min.y.push_back(r.min_output_norm);
            s_max.x.push_back(r.step);
            s_max.y.push_back(r.max_output_norm);
        }
        series.push_back(std::move(s_min));
        series.push_back(std::move(s_max));
    }
    series.push_back({"min output norm (mean)", steps, mean_min, "#1f77b4", 2.5, false});
    series.push_back({"max output norm (mean)", steps, mean_max, "#d62728", 2.5, false});
    SvgStyle style;
    style.title = "Embedding norm envelope along training";
    style.x_label = "step";
    style.y_label = "output norm";
    style.dashed_hline = 0.0;
    result.svg_path = out_path(cfg, prefix + ".svg");
    write_text_file(result.svg_path, render_svg(series, style));

    nlohmann::json summary;
    summary["pipeline"] = prefix;
    summary["runs"] = kFigureRuns;
    summary["empirical_eta"] = result.empirical_eta;
    summary["norm_positivity_violated"] = result.norm_positivity_violated;
    summary["eta_monitor"] = cfg.train.eta_monitor;
    summary["norm_upper_monitor"] = cfg.train.norm_upper_monitor;
    summary["zero_b_control"] = zero_b_control;
    result.summary_json_path = out_path(cfg, prefix + "_summary.json");
    write_json_file(result.summary_json_path, summary);
    return result;
}

GenDataResult run_gen_data(const ExperimentConfig& cfg) {
    const LatentClassModel model = build_model(cfg);
    const TripletDataset data = build_dataset(cfg, model, 0);
    GenDataResult result;
    result.dataset_path = out_path(cfg, "dataset.cbl");
    result.delta = data.delta();
    save_dataset(data, result.dataset_path);
    return result;
}

TrainRunResult run_train(const ExperimentConfig& cfg) {
    const LatentClassModel model = build_model(cfg);
    const TripletDataset data = build_dataset(cfg, model, 0);
    const VerifyBudget budget = verify_budget(cfg);
    Rng eval_rng = Rng::derive(cfg.seed, streams::kEval);

    // Loss estimates plus the inequality and small-gradient checks at every
    // eval stride; cheap trace fields at every step.
    const EvalHook hook = [&](const Encoder& snapshot, int step) {
        const Task task = full_task(model);
        const MeanClassifier mc =
            mean_classifier(snapshot, model, task, budget.n_per_class, eval_rng);
        EvalRow row;
        row.step = step;
        row.l_sup_mu = supervised_loss_mu(snapshot, model, task, mc, budget.n_mc, eval_rng);
        row.l_un = unsupervised_loss(snapshot, model, 1, budget.n_mc, eval_rng);
        row.reports.push_back(lemma31_report(row.l_sup_mu, row.l_un, model.rho()));
        row.reports.push_back(
            check_lemma42(collect_triplet_point(snapshot, data), cfg.train.eta_monitor));
        return row;
    };
    const TrainResult trained = train(build_encoder(cfg, 0), data, train_config(cfg), hook);

    std::ostringstream csv;
    csv << "step,objective,objective_per_triplet,max_loss_vector_norm,min_output_norm,"
           "max_output_norm,gradient_norm\n";
    for (const auto& row : trained.trace.rows)
        csv << row.step << "," << format_double(row.objective) << ","
            << format_double(row.objective_per_triplet) << ","
            << format_double(row.max_loss_vector_norm) << ","
            << format_double(row.min_output_norm) << "," << format_double(row.max_output_norm)
            << "," << format_double(row.gradient_norm) << "\n";

    std::ostringstream evals;
    evals << "step,l_un,l_un_ci,l_sup_mu,l_sup_mu_ci,lemma31_holds,lemma42_precondition,"
             "lemma42_holds\n";
    for (const auto& row : trained.trace.evals) {
        const InequalityReport& bound = row.reports[0];
        const InequalityReport& loss_bound = row.reports[1];
        evals << row.step << "," << format_double(row.l_un.value) << ","
              << format_double(row.l_un.ci_half_width) << "," << format_double(row.l_sup_mu.value)
              << "," << format_double(row.l_sup_mu.ci_half_width) << "," << bool_cell(bound.holds)
              << "," << bool_cell(loss_bound.precondition_met) << ","
              << bool_cell(loss_bound.holds) << "\n";
    }

    TrainRunResult result;
    result.trace_csv_path = out_path(cfg, "train_trace.csv");
    write_text_file(result.trace_csv_path, csv.str());
    write_text_file(out_path(cfg, "train_evals.csv"), evals.str());
    result.checkpoint_path = out_path(cfg, "encoder.cbe");
    save_encoder(trained.encoder, result.checkpoint_path);
    result.reached_target = trained.reached_target;
    result.final_objective = trained.trace.rows.back().objective;

    nlohmann::json summary;
    summary["steps_run"] = trained.trace.rows.back().step;
    summary["final_objective"] = result.final_objective;
    summary["reached_target"] = trained.reached_target;
    summary["dataset_delta"] = data.delta();
    write_json_file(out_path(cfg, "train_summary.json"), summary);
    return result;
}

CouponResult run_coupon(const ExperimentConfig& cfg) {
    Eigen::VectorXd rho = cfg.model.rho;
    if (rho.size() == 0)
        rho = Eigen::VectorXd::Constant(cfg.model.n_classes,
                                        1.0 / static_cast<double>(cfg.model.n_classes));
    Rng rng = Rng::derive(cfg.seed, streams::kCoupon);
    const long n_trials = std::max<long>(100000, cfg.verify.n_mc);

    CouponResult result;
    std::ostringstream csv;
    csv << "n_draws,exact,mc,mc_ci,within\n";
    nlohmann::json coverage = nlohmann::json::array();
    for (long n_draws : cfg.verify.n_list) {
        const double exact = coupon_coverage_exact(rho, n_draws);
        const LossEstimate mc = coupon_coverage_mc(rho, n_draws, n_trials, rng);
        const double sigma = std::sqrt(exact * (1.0 - exact) / static_cast<double>(n_trials));
        const bool within = std::abs(mc.value - exact) <= 3.0 * sigma + 1e-12;
        result.all_within = result.all_within && within;
        csv << n_draws << "," << format_double(exact) << "," << format_double(mc.value) << ","
            << format_double(mc.ci_half_width) << "," << bool_cell(within) << "\n";
        coverage.push_back({{"n_draws", n_draws},
                            {"exact", exact},
                            {"mc", mc.value},
                            {"mc_ci", mc.ci_half_width},
                            {"n_trials", n_trials},
                            {"within_3_sigma", within}});
    }

    const std::vector<double> betas{2.0, 4.0, 6.0, 8.0, 10.0};
    const CollectorStats stats = collector_stopping_stats(cfg.model.n_classes, n_trials,
                                                          {betas.data(), betas.size()}, rng);
    nlohmann::json tails = nlohmann::json::array();
    for (const auto& tail : stats.tails) {
        result.all_within = result.all_within && tail.within;
        tails.push_back({{"beta", tail.beta},
                         {"frequency", tail.frequency},
                         {"chebyshev_bound", tail.chebyshev_bound},
                         {"slack", tail.slack},
                         {"within", tail.within}});
    }

    nlohmann::json j;
    j["coverage"] = coverage;
    j["collector"] = {{"n_classes", cfg.model.n_classes},
                      {"n_trials", stats.n_trials},
                      {"sample_mean", stats.sample_mean},
                      {"sample_variance", stats.sample_variance},
                      {"expected_mean", stats.expected_mean},
                      {"chebyshev_variance", stats.chebyshev_variance},
                      {"tails", tails}};
    j["all_within"] = result.all_within;

    result.csv_path = out_path(cfg, "coupon.csv");
    write_text_file(result.csv_path, csv.str());
    result.json_path = out_path(cfg, "coupon.json");
    write_json_file(result.json_path, j);
    return result;
}

SmoothnessResult run_smoothness(const ExperimentConfig& cfg, long n_probes,
                                int hessian_points_per_c) {
    Rng rng = Rng::derive(cfg.seed, streams::kSmoothness);
    const int dim = cfg.encoder.d;
    SmoothnessResult result;
    result.worst_hessian_margin = -std::numeric_limits<double>::infinity();

    nlohmann::json quad = nlohmann::json::array();
    for (double c_bound : {0.5, 1.0, 2.0}) {
        const QuadraticBoundReport probe = check_quadratic_bound(dim, c_bound, n_probes, rng);
        result.all_hold = result.all_hold && probe.holds;
        result.quadratic.push_back(probe);
        quad.push_back({{"c_bound", probe.c_bound},
                        {"smooth_constant", probe.smooth_constant},
                        {"n_probes", probe.n_probes},
                        {"violations", probe.violations},
                        {"max_ratio", probe.max_ratio},
                        {"max_excess", probe.max_excess},
                        {"holds", probe.holds}});

        if (dim <= 8) {
            for (int p = 0; p < hessian_points_per_c; ++p) {
                const HessianCheck check = hessian_norm_check(sample_block_ball(dim, c_bound, rng));
                ++result.hessian_points;
                if (!check.holds) ++result.hessian_failures;
                result.worst_hessian_margin =
                    std::max(result.worst_hessian_margin, check.numeric_norm - check.bound);
            }
        }
    }
    result.all_hold = result.all_hold && result.hessian_failures == 0;

    nlohmann::json j;
    j["quadratic_bound"] = quad;
    j["hessian"] = {{"points", result.hessian_points},
                    {"failures", result.hessian_failures},
                    {"worst_margin", result.hessian_points > 0 ? result.worst_hessian_margin : 0.0}};
    j["all_hold"] = result.all_hold;
    result.json_path = out_path(cfg, "smoothness.json");
    write_json_file(result.json_path, j);
    return result;
}

VerifyResult run_verify(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    const Encoder enc = load_encoder(checkpoint_path);
    const LatentClassModel model = build_model(cfg);
    if (enc.input_dim() != model.input_dim())
        throw std::invalid_argument("run_verify: checkpoint input_dim does not match config");
    const TripletDataset data = build_dataset(cfg, model, 0);
    Rng rng = Rng::derive(cfg.seed, streams::kVerify);
    const VerifyBudget budget = verify_budget(cfg);

    VerifyResult result;
    for (const std::string& check : cfg.verify.checks) {
        if (check == "lemma31") {
            result.reports.push_back(check_lemma31(enc, model, budget, rng));
        } else if (check == "lemma32") {
            for (long n : cfg.verify.n_list) {
                if (n < model.n_classes()) {
                    // Coverage is zero below N_C: record as unmet, never assert.
                    InequalityReport skip;
                    skip.name = "lemma32";
                    skip.precondition_met = false;
                    skip.context["n_negatives"] = static_cast<double>(n);
                    skip.context["n_classes"] = model.n_classes();
                    result.reports.push_back(skip);
                } else {
                    result.reports.push_back(check_lemma32(enc, model, n, budget, rng));
                }
            }
        } else if (check == "prop33") {
            for (int k : cfg.verify.k_list)
                for (long n : cfg.verify.n_list)
                    result.reports.push_back(check_prop33(enc, model, k, n, budget, rng));
        } else if (check == "smooth") {
            const QuadraticBoundReport probe =
                check_quadratic_bound(enc.output_dim(), cfg.train.norm_upper_monitor, 20000, rng);
            result.reports.push_back(smooth_report(probe));
        } else if (check == "lemma42") {
            result.reports.push_back(
                check_lemma42(collect_triplet_point(enc, data), cfg.train.eta_monitor));
        } else {
            throw std::invalid_argument("run_verify: unknown check '" + check + "'");
        }
    }

    for (const auto& report : result.reports)
        if (report.precondition_met && !report.holds) result.all_asserted_hold = false;

    nlohmann::json j;
    j["checkpoint"] = checkpoint_path;
    j["all_asserted_hold"] = result.all_asserted_hold;
    j["reports"] = nlohmann::json::parse(reports_to_json(result.reports));
    result.json_path = out_path(cfg, "verify_report.json");
    write_json_file(result.json_path, j);
    return result;
}

}  // namespace cbl
