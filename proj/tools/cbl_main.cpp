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

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "cbl/config.hpp"
#include "cbl/idx.hpp"
#include "cbl/pipelines.hpp"

namespace {

struct GlobalOptions {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
};

cbl::ExperimentConfig load_config(const GlobalOptions& opts) {
    if (opts.config_path.empty())
        throw std::runtime_error("this subcommand requires --config <path>");
    cbl::ExperimentConfig cfg = cbl::ExperimentConfig::parse_file(opts.config_path);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (!opts.out_dir.empty()) cfg.output.directory = opts.out_dir;
    return cfg;
}

int checks_exit_code(bool ok) { return ok ? 0 : 1; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cblab: contrastive-loss bound certification harness"};
    app.require_subcommand(1);

    GlobalOptions opts;
    app.add_option("--config", opts.config_path, "experiment config file (TOML-style)");
    app.add_option("--seed", opts.seed, "override the config seed")
        ->each([&](const std::string&) { opts.seed_set = true; });
    app.add_option("--out", opts.out_dir, "override the output directory");

    auto* gen_data = app.add_subcommand("gen-data", "sample a delta-separated triplet dataset");
    auto* train_cmd = app.add_subcommand("train", "full-batch gradient descent on the objective");
    auto* figure1 = app.add_subcommand("figure1", "losses and 1/p_min bound over 5 runs");
    auto* figure2 =
        app.add_subcommand("figure2", "losses and coverage bound over 5 runs, per N in n_list");
    auto* figure3 = app.add_subcommand("figure3", "embedding norm envelopes over 5 runs");
    // Global flags (--config/--seed/--out) may follow the subcommand.
    for (CLI::App* sub : {gen_data, train_cmd, figure1, figure2, figure3}) sub->fallthrough();
    bool zero_b_control = false;
    figure3->add_flag("--zero-b-control", zero_b_control,
                      "negative control: initialize the output layer to zero");
    auto* coupon = app.add_subcommand("coupon", "coverage probabilities and collector tails");
    auto* smoothness = app.add_subcommand("smoothness", "quadratic bound and Hessian probes");
    auto* verify = app.add_subcommand("verify", "run the verifier battery on a checkpoint");
    std::string checkpoint_path;
    verify->add_option("checkpoint", checkpoint_path, "encoder checkpoint (.cbe)")->required();
    auto* idx_info = app.add_subcommand("idx-info", "inspect an IDX image or label file");
    std::string idx_path;
    bool idx_labels = false;
    idx_info->add_option("path", idx_path, "IDX file")->required();
    idx_info->add_flag("--labels", idx_labels, "parse as a label file");
    for (CLI::App* sub : {coupon, smoothness, verify, idx_info}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_data->parsed()) {
            const auto result = cbl::run_gen_data(load_config(opts));
            std::printf("dataset: %s\ndelta: %.17g\n", result.dataset_path.c_str(), result.delta);
            return 0;
        }
        if (train_cmd->parsed()) {
            const auto result = cbl::run_train(load_config(opts));
            std::printf("trace: %s\ncheckpoint: %s\nfinal objective: %.17g\n",
                        result.trace_csv_path.c_str(), result.checkpoint_path.c_str(),
                        result.final_objective);
            return 0;
        }
        if (figure1->parsed()) {
            const auto result = cbl::run_figure1(load_config(opts));
            std::printf("svg: %s\nall bounds hold: %s\n", result.svg_path.c_str(),
                        result.all_hold ? "yes" : "NO");
            return checks_exit_code(result.all_hold);
        }
        if (figure2->parsed()) {
            const auto cfg = load_config(opts);
            bool all_hold = true;
            for (long n : cfg.verify.n_list) {
                const auto result = cbl::run_figure2(cfg, n);
                std::printf("N=%ld svg: %s bounds hold: %s\n", n, result.svg_path.c_str(),
                            result.all_hold ? "yes" : "NO");
                all_hold = all_hold && result.all_hold;
            }
            return checks_exit_code(all_hold);
        }
        if (figure3->parsed()) {
            const auto result = cbl::run_figure3(load_config(opts), zero_b_control);
            std::printf("svg: %s\nempirical eta: %.17g\nnorm positivity violated: %s\n",
                        result.svg_path.c_str(), result.empirical_eta,
                        result.norm_positivity_violated ? "yes" : "no");
            // The control run is expected to violate; only plain runs gate.
            return checks_exit_code(zero_b_control || !result.norm_positivity_violated);
        }
        if (coupon->parsed()) {
            const auto result = cbl::run_coupon(load_config(opts));
            std::printf("report: %s\nall within tolerance: %s\n", result.json_path.c_str(),
                        result.all_within ? "yes" : "NO");
            return checks_exit_code(result.all_within);
        }
        if (smoothness->parsed()) {
            const auto result = cbl::run_smoothness(load_config(opts));
            std::printf("report: %s\nall hold: %s\n", result.json_path.c_str(),
                        result.all_hold ? "yes" : "NO");
            return checks_exit_code(result.all_hold);
        }
        if (verify->parsed()) {
            const auto result = cbl::run_verify(load_config(opts), checkpoint_path);
            std::printf("report: %s\nall asserted checks hold: %s\n", result.json_path.c_str(),
                        result.all_asserted_hold ? "yes" : "NO");
            return checks_exit_code(result.all_asserted_hold);
        }
        if (idx_info->parsed()) {
            if (idx_labels) {
                const auto labels = cbl::load_idx_labels(idx_path);
                std::printf("labels: %zu\n", labels.labels.size());
            } else {
                const auto images = cbl::load_idx_images(idx_path);
                std::printf("images: %u (%u x %u)\n", images.count, images.rows, images.cols);
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
