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

#include <functional>
#include <optional>
#include <vector>

#include "cbl/encoder.hpp"
#include "cbl/latent_model.hpp"
#include "cbl/losses.hpp"
#include "cbl/verifier.hpp"

namespace cbl {

struct TrainConfig {
    double learning_rate = 0.0;
    int max_steps = 1;
    double target_loss = 0.0;        // early stop when total objective <= this
    double eta_monitor = 0.0;        // embedding-norm corridor, monitored only
    double norm_upper_monitor = 0.0;
    int eval_every = 0;              // 0 disables the evaluation hook
    std::uint64_t seed = 0;

    void validate() const;
};

/// Cheap per-step scalars, logged at every step.
struct TraceRow {
    int step = 0;
    double objective = 0.0;            // total over triplets
    double objective_per_triplet = 0.0;
    double max_loss_vector_norm = 0.0;  // epsilon_t
    double min_output_norm = 0.0;       // over all dataset members
    double max_output_norm = 0.0;
    double gradient_norm = 0.0;         // w.r.t. all parameters
};

/// Expensive evaluation results at eval strides, produced by the hook.
struct EvalRow {
    int step = 0;
    LossEstimate l_un;
    LossEstimate l_sup_mu;
    std::vector<InequalityReport> reports;
};

struct TrainingTrace {
    std::vector<TraceRow> rows;
    std::vector<EvalRow> evals;
};

using EvalHook = std::function<EvalRow(const Encoder& snapshot, int step)>;

struct TrainResult {
    Encoder encoder;
    TrainingTrace trace;
    bool reached_target = false;
};

/// Full-batch gradient descent on the empirical triplet objective.
/// Aborts with a diagnostic if the objective exceeds 10x its initial value.
TrainResult train(Encoder enc, const TripletDataset& data, const TrainConfig& cfg,
                  const EvalHook& hook = {});

/// Exact min and max embedding norm over all 3n dataset members.
std::pair<double, double> track_norms(const Encoder& enc, const TripletDataset& data);

}  // namespace cbl
