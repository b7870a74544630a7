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

#include "cbl/trainer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cbl {

void TrainConfig::validate() const {
    if (learning_rate < 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be >= 0");
    if (max_steps < 1) throw std::invalid_argument("TrainConfig: max_steps must be >= 1");
    if (target_loss < 0.0) throw std::invalid_argument("TrainConfig: target_loss must be >= 0");
    if (eta_monitor <= 0.0) throw std::invalid_argument("TrainConfig: eta_monitor must be > 0");
    if (norm_upper_monitor <= eta_monitor)
        throw std::invalid_argument("TrainConfig: norm_upper_monitor must exceed eta_monitor");
    if (eval_every < 0) throw std::invalid_argument("TrainConfig: eval_every must be >= 0");
}

namespace {

struct StepState {
    double objective = 0.0;
    double max_loss_vector_norm = 0.0;
    double min_output_norm = 0.0;
    double max_output_norm = 0.0;
    ParameterGradients grads;
};

/// One full-batch pass: objective, loss-vector blocks routed into the
/// batched backward pass, and the norm extremes over all members.
StepState evaluate_step(const Encoder& enc, const Eigen::MatrixXd& members, int n_triplets) {
    StepState state;
    const BatchTape tape = forward_batch(enc, members);

    Eigen::MatrixXd y_grad(enc.output_dim(), members.cols());
    state.min_output_norm = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_triplets; ++i) {
        const TripletEmbedding z{tape.Y.col(3 * i), tape.Y.col(3 * i + 1),
                                 tape.Y.col(3 * i + 2)};
        state.objective += triplet_loss(z);
        const TripletGrad g = triplet_loss_grad(z);
        y_grad.col(3 * i) = g.g1;
        y_grad.col(3 * i + 1) = g.g2;
        y_grad.col(3 * i + 2) = g.g3;
        state.max_loss_vector_norm = std::max(state.max_loss_vector_norm, g.max_block_norm());
    }
    for (Eigen::Index c = 0; c < tape.Y.cols(); ++c) {
        const double norm = tape.Y.col(c).norm();
        state.min_output_norm = std::min(state.min_output_norm, norm);
        state.max_output_norm = std::max(state.max_output_norm, norm);
    }
    state.grads = backward_batch(enc, tape, y_grad);
    return state;
}

}  // namespace

TrainResult train(Encoder enc, const TripletDataset& data, const TrainConfig& cfg,
                  const EvalHook& hook) {
    cfg.validate();
    if (data.delta() <= 0.0)
        throw std::invalid_argument("train: dataset must be delta-separated (delta > 0)");

    const Eigen::MatrixXd members = data.member_matrix();
    const int n = data.size();

    TrainResult result{std::move(enc), {}, false};
    double initial_objective = 0.0;

    for (int step = 0; step <= cfg.max_steps; ++step) {
        const StepState state = evaluate_step(result.encoder, members, n);
        if (!std::isfinite(state.objective))
            throw std::runtime_error("train: non-finite objective at step " +
                                     std::to_string(step) + "; reduce the learning rate");
        if (step == 0) initial_objective = state.objective;

        TraceRow row;
        row.step = step;
        row.objective = state.objective;
        row.objective_per_triplet = state.objective / static_cast<double>(n);
        row.max_loss_vector_norm = state.max_loss_vector_norm;
        row.min_output_norm = state.min_output_norm;
        row.max_output_norm = state.max_output_norm;
        row.gradient_norm = state.grads.norm();
        result.trace.rows.push_back(row);

        if (hook && cfg.eval_every > 0 && step % cfg.eval_every == 0)
            result.trace.evals.push_back(hook(result.encoder, step));

        if (state.objective <= cfg.target_loss) {
            result.reached_target = true;
            break;
        }
        if (state.objective > 10.0 * initial_objective && step > 0)
            throw std::runtime_error(
                "train: diverged at step " + std::to_string(step) + " (objective " +
                std::to_string(state.objective) + " exceeds 10x initial " +
                std::to_string(initial_objective) + "); reduce the learning rate");
        if (step == cfg.max_steps) break;

        result.encoder = sgd_step(std::move(result.encoder), state.grads, cfg.learning_rate);
    }
    return result;
}

std::pair<double, double> track_norms(const Encoder& enc, const TripletDataset& data) {
    const Eigen::MatrixXd Y = enc.apply_batch(data.member_matrix());
    double min_norm = std::numeric_limits<double>::infinity();
    double max_norm = 0.0;
    for (Eigen::Index c = 0; c < Y.cols(); ++c) {
        const double norm = Y.col(c).norm();
        min_norm = std::min(min_norm, norm);
        max_norm = std::max(max_norm, norm);
    }
    return {min_norm, max_norm};
}

}  // namespace cbl
