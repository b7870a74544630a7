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

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cbl {

struct ModelConfig {
    int n_classes = 0;
    int input_dim = 0;
    double spread = 0.0;
    Eigen::VectorXd rho;  // empty means uniform
};

struct DatasetConfig {
    int n = 0;
    double augment_noise = 0.0;
    double min_delta = 0.0;
};

struct EncoderConfig {
    int m = 0;
    int L = 0;
    int d = 0;
};

struct TrainBlock {
    double learning_rate = 0.0;
    int max_steps = 0;
    double target_loss = 0.0;
    double eta_monitor = 0.0;
    double norm_upper_monitor = 0.0;
    int eval_every = 0;
};

struct VerifyConfig {
    std::vector<std::string> checks;
    std::vector<long> n_list;
    std::vector<int> k_list;
    long n_mc = 0;
    long n_per_class = 0;
    int n_tasks = 0;
    long n_train = 0;
    int opt_steps = 0;
};

struct OutputConfig {
    std::string directory;
    std::vector<std::string> formats;
};

/// Full experiment configuration, parsed strictly from a TOML-style
/// key-value document: unknown keys and missing keys both abort with the
/// offending path. Physical constants carry no defaults.
struct ExperimentConfig {
    ModelConfig model;
    DatasetConfig dataset;
    EncoderConfig encoder;
    TrainBlock train;
    VerifyConfig verify;
    OutputConfig output;
    std::uint64_t seed = 0;

    static ExperimentConfig parse_string(const std::string& text);
    static ExperimentConfig parse_file(const std::string& path);
};

}  // namespace cbl
