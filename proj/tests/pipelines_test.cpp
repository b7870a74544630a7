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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;
using cbl::ExperimentConfig;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_lines(const std::string& text) {
    std::size_t count = 0;
    for (char c : text)
        if (c == '\n') ++count;
    return count;
}

ExperimentConfig tiny_config(const std::string& out_dir) {
    const std::string text = R"(seed = 77

[model]
n_classes = 3
input_dim = 6
spread = 0.2
rho = "uniform"

[dataset]
n = 6
augment_noise = 0.0
min_delta = 0.001

[encoder]
m = 8
L = 1
d = 4

[train]
learning_rate = 0.05
max_steps = 6
target_loss = 0.0
eta_monitor = 0.05
norm_upper_monitor = 20.0
eval_every = 3

[verify]
checks = ["lemma31", "lemma32", "prop33", "smooth", "lemma42"]
n_list = [5]
k_list = [1]
n_mc = 60
n_per_class = 30
n_tasks = 3
n_train = 60
opt_steps = 30

[output]
directory = "PLACEHOLDER"
formats = ["csv", "svg", "json"]
)";
    ExperimentConfig cfg = ExperimentConfig::parse_string(text);
    cfg.output.directory = out_dir;
    return cfg;
}

std::string fresh_dir(const std::string& name) {
    const fs::path dir = fs::path(testing::TempDir()) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

TEST(Figure1, ProducesExpectedArtifacts) {
    const auto cfg = tiny_config(fresh_dir("fig1"));
    const auto result = run_figure1(cfg);
    ASSERT_EQ(result.run_csv_paths.size(), 5u);
    for (const auto& path : result.run_csv_paths) {
        const std::string csv = read_file(path);
        // header + 3 eval strides (steps 0, 3, 6)
        EXPECT_EQ(count_lines(csv), 4u);
        EXPECT_EQ(csv.rfind("step,run_id,l_un,l_un_ci,l_sup_mu,l_sup_mu_ci,rhs_full,"
                            "rhs_stripped,holds\n",
                            0),
                  0u);
    }
    EXPECT_TRUE(fs::exists(result.mean_csv_path));
    EXPECT_TRUE(fs::exists(result.svg_path));
    EXPECT_TRUE(fs::exists(result.summary_json_path));
    EXPECT_TRUE(result.all_hold);
    ASSERT_EQ(result.runs.size(), 5u);
    for (const auto& rows : result.runs) EXPECT_EQ(rows.size(), 3u);
}

TEST(Figure1, RerunIsByteIdentical) {
    const auto cfg = tiny_config(fresh_dir("fig1_rerun"));
    const auto first = run_figure1(cfg);
    std::vector<std::string> before;
    for (const auto& p : first.run_csv_paths) before.push_back(read_file(p));
    const std::string svg_before = read_file(first.svg_path);
    const std::string mean_before = read_file(first.mean_csv_path);

    const auto second = run_figure1(cfg);
    for (std::size_t i = 0; i < before.size(); ++i)
        EXPECT_EQ(read_file(second.run_csv_paths[i]), before[i]) << "run " << i;
    EXPECT_EQ(read_file(second.svg_path), svg_before);
    EXPECT_EQ(read_file(second.mean_csv_path), mean_before);
}

TEST(Figure1, SeedChangesArtifacts) {
    auto cfg = tiny_config(fresh_dir("fig1_seed_a"));
    const auto first = run_figure1(cfg);
    const std::string csv_a = read_file(first.run_csv_paths[0]);
    cfg.seed = 78;
    cfg.output.directory = fresh_dir("fig1_seed_b");
    const auto second = run_figure1(cfg);
    EXPECT_NE(read_file(second.run_csv_paths[0]), csv_a);
}

TEST(Figure2, CoverageBoundPipelineRuns) {
    const auto cfg = tiny_config(fresh_dir("fig2"));
    const auto result = run_figure2(cfg, 5);
    EXPECT_TRUE(result.all_hold);
    const std::string summary = read_file(result.summary_json_path);
    EXPECT_NE(summary.find("p_cc_exact"), std::string::npos);
}

TEST(Figure2, RejectsTooFewNegatives) {
    const auto cfg = tiny_config(fresh_dir("fig2_bad"));
    EXPECT_THROW(run_figure2(cfg, 2), std::invalid_argument);
}

TEST(Figure3, TracksNormEnvelope) {
    const auto cfg = tiny_config(fresh_dir("fig3"));
    const auto result = run_figure3(cfg);
    ASSERT_EQ(result.runs.size(), 5u);
    for (const auto& rows : result.runs) {
        EXPECT_EQ(rows.size(), 7u);  // steps 0..6 inclusive
        for (const auto& row : rows) EXPECT_LE(row.min_output_norm, row.max_output_norm);
    }
    EXPECT_GT(result.empirical_eta, 0.0);
    EXPECT_FALSE(result.norm_positivity_violated);
}

TEST(Figure3, ZeroOutputControlIsFlagged) {
    const auto cfg = tiny_config(fresh_dir("fig3_zero"));
    const auto result = run_figure3(cfg, /*zero_b_control=*/true);
    EXPECT_EQ(result.empirical_eta, 0.0);
    EXPECT_TRUE(result.norm_positivity_violated);
    const std::string summary = read_file(result.summary_json_path);
    EXPECT_NE(summary.find("\"norm_positivity_violated\": true"), std::string::npos);
}

TEST(GenData, WritesLoadableDataset) {
    const auto cfg = tiny_config(fresh_dir("gendata"));
    const auto result = cbl::run_gen_data(cfg);
    const auto data = cbl::load_dataset(result.dataset_path);
    EXPECT_EQ(data.size(), 6);
    EXPECT_EQ(data.delta(), result.delta);
    EXPECT_GE(data.delta(), 0.001);
}

TEST(TrainPipeline, WritesTraceAndCheckpoint) {
    const auto cfg = tiny_config(fresh_dir("trainrun"));
    const auto result = cbl::run_train(cfg);
    const std::string trace = read_file(result.trace_csv_path);
    EXPECT_EQ(count_lines(trace), 8u);  // header + steps 0..6
    EXPECT_EQ(trace.rfind("step,objective,", 0), 0u);
    const auto enc = cbl::load_encoder(result.checkpoint_path);
    EXPECT_EQ(enc.width(), 8);
    EXPECT_EQ(enc.output_dim(), 4);
}

TEST(Coupon, ExactAndMcAgree) {
    const auto cfg = tiny_config(fresh_dir("coupon"));
    const auto result = cbl::run_coupon(cfg);
    EXPECT_TRUE(result.all_within);
    const std::string csv = read_file(result.csv_path);
    EXPECT_EQ(csv.rfind("n_draws,exact,mc,mc_ci,within\n", 0), 0u);
}

TEST(Smoothness, ProbesHold) {
    const auto cfg = tiny_config(fresh_dir("smooth"));
    const auto result = cbl::run_smoothness(cfg, 2000, 10);
    EXPECT_TRUE(result.all_hold);
    EXPECT_EQ(result.quadratic.size(), 3u);
    EXPECT_EQ(result.hessian_failures, 0);
    EXPECT_GT(result.hessian_points, 0);
}

TEST(VerifyBattery, RunsAllChecksOnCheckpoint) {
    const auto cfg = tiny_config(fresh_dir("verify"));
    const auto trained = cbl::run_train(cfg);
    const auto result = cbl::run_verify(cfg, trained.checkpoint_path);
    EXPECT_TRUE(result.all_asserted_hold);
    // lemma31, lemma32 (one N), prop33 (one k x one N), smooth, lemma42.
    EXPECT_EQ(result.reports.size(), 5u);
    const std::string json = read_file(result.json_path);
    EXPECT_NE(json.find("\"all_asserted_hold\": true"), std::string::npos);
}

TEST(VerifyBattery, RejectsUnknownCheckName) {
    auto cfg = tiny_config(fresh_dir("verify_bad"));
    const auto trained = cbl::run_train(cfg);
    cfg.verify.checks = {"lemma99"};
    EXPECT_THROW(cbl::run_verify(cfg, trained.checkpoint_path), std::invalid_argument);
}

}  // namespace
