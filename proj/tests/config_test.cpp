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

#include "cbl/config.hpp"

#include <gtest/gtest.h>

#include <string>

namespace {

using cbl::ExperimentConfig;

std::string base_config() {
    return R"(# experiment configuration
seed = 42

[model]
n_classes = 5
input_dim = 16
spread = 0.15
rho = "uniform"

[dataset]
n = 64
augment_noise = 0.0
min_delta = 0.01

[encoder]
m = 128
L = 2
d = 16

[train]
learning_rate = 0.02
max_steps = 500
target_loss = 0.0
eta_monitor = 0.4
norm_upper_monitor = 10.0
eval_every = 25

[verify]
checks = ["lemma31", "lemma32", "prop33", "smooth", "lemma42"]
n_list = [15, 25, 35]
k_list = [1, 2, 4]
n_mc = 2000
n_per_class = 500
n_tasks = 20
n_train = 1000
opt_steps = 300

[output]
directory = "out"
formats = ["csv", "svg", "json"]
)";
}

TEST(Config, ParsesFullDocument) {
    const ExperimentConfig cfg = ExperimentConfig::parse_string(base_config());
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_EQ(cfg.model.n_classes, 5);
    EXPECT_EQ(cfg.model.input_dim, 16);
    EXPECT_DOUBLE_EQ(cfg.model.spread, 0.15);
    EXPECT_EQ(cfg.model.rho.size(), 0);  // uniform marker
    EXPECT_EQ(cfg.dataset.n, 64);
    EXPECT_DOUBLE_EQ(cfg.dataset.min_delta, 0.01);
    EXPECT_EQ(cfg.encoder.m, 128);
    EXPECT_EQ(cfg.encoder.L, 2);
    EXPECT_EQ(cfg.encoder.d, 16);
    EXPECT_DOUBLE_EQ(cfg.train.learning_rate, 0.02);
    EXPECT_EQ(cfg.train.max_steps, 500);
    EXPECT_EQ(cfg.train.eval_every, 25);
    EXPECT_EQ(cfg.verify.checks.size(), 5u);
    EXPECT_EQ(cfg.verify.n_list, (std::vector<long>{15, 25, 35}));
    EXPECT_EQ(cfg.verify.k_list, (std::vector<int>{1, 2, 4}));
    EXPECT_EQ(cfg.verify.n_mc, 2000);
    EXPECT_EQ(cfg.output.directory, "out");
    EXPECT_EQ(cfg.output.formats, (std::vector<std::string>{"csv", "svg", "json"}));
}

TEST(Config, ExplicitPriorList) {
    std::string text = base_config();
    const auto pos = text.find("rho = \"uniform\"");
    text.replace(pos, std::string("rho = \"uniform\"").size(),
                 "rho = [0.3, 0.2, 0.2, 0.2, 0.1]");
    const ExperimentConfig cfg = ExperimentConfig::parse_string(text);
    ASSERT_EQ(cfg.model.rho.size(), 5);
    EXPECT_DOUBLE_EQ(cfg.model.rho[0], 0.3);
    EXPECT_DOUBLE_EQ(cfg.model.rho[4], 0.1);
}

TEST(Config, PriorLengthMismatchRejected) {
    std::string text = base_config();
    const auto pos = text.find("rho = \"uniform\"");
    text.replace(pos, std::string("rho = \"uniform\"").size(), "rho = [0.5, 0.5]");
    EXPECT_THROW(ExperimentConfig::parse_string(text), std::runtime_error);
}

TEST(Config, UnknownKeyRejectedWithPath) {
    std::string text = base_config() + "\n[model]\nwidgets = 3\n";
    try {
        ExperimentConfig::parse_string(text);
        FAIL() << "expected rejection";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("model.widgets"), std::string::npos);
    }
}

TEST(Config, UnknownSectionRejected) {
    const std::string text = base_config() + "\n[extras]\nknob = 1\n";
    try {
        ExperimentConfig::parse_string(text);
        FAIL() << "expected rejection";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("extras.knob"), std::string::npos);
    }
}

TEST(Config, MissingKeyRejectedWithPath) {
    std::string text = base_config();
    const auto pos = text.find("max_steps = 500\n");
    text.erase(pos, std::string("max_steps = 500\n").size());
    try {
        ExperimentConfig::parse_string(text);
        FAIL() << "expected rejection";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("train.max_steps"), std::string::npos);
    }
}

TEST(Config, DuplicateKeyRejected) {
    const std::string text = base_config() + "\n[model]\nn_classes = 7\n";
    EXPECT_THROW(ExperimentConfig::parse_string(text), std::runtime_error);
}

TEST(Config, TypeErrorsRejected) {
    std::string text = base_config();
    auto pos = text.find("max_steps = 500");
    text.replace(pos, std::string("max_steps = 500").size(), "max_steps = \"lots\"");
    EXPECT_THROW(ExperimentConfig::parse_string(text), std::runtime_error);
}

TEST(Config, CommentsAndWhitespaceTolerated) {
    std::string text = base_config();
    text += "\n# trailing comment with [brackets] and = signs\n\n";
    EXPECT_NO_THROW(ExperimentConfig::parse_string(text));
}

TEST(Config, SeedAcceptsFullU64Range) {
    std::string text = base_config();
    const auto pos = text.find("seed = 42");
    text.replace(pos, std::string("seed = 42").size(), "seed = 18446744073709551615");
    const ExperimentConfig cfg = ExperimentConfig::parse_string(text);
    EXPECT_EQ(cfg.seed, 18446744073709551615ull);
}

TEST(Config, MissingFileRejected) {
    EXPECT_THROW(ExperimentConfig::parse_file("/nonexistent/config.toml"), std::runtime_error);
}

}  // namespace
