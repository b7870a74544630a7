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

#include <Eigen/Core>
#include <string>
#include <vector>

#include "cbl/rng.hpp"

namespace cbl {

class Encoder;

/// Gradients with the same shapes as the encoder parameters.
struct ParameterGradients {
    Eigen::MatrixXd A;
    std::vector<Eigen::MatrixXd> W;
    Eigen::MatrixXd B;

    static ParameterGradients zeros_like(const Encoder& enc);
    void accumulate(const ParameterGradients& other);
    void scale(double factor);
    double squared_norm() const;
    double norm() const;
};

/// Deep feed-forward ReLU encoder without bias terms:
///   g_0 = A x,  h_0 = relu(g_0),  g_l = W_l h_{l-1},  h_l = relu(g_l),
///   y = B h_L.
class Encoder {
  public:
    Encoder(Eigen::MatrixXd A, std::vector<Eigen::MatrixXd> W, Eigen::MatrixXd B);

    int input_dim() const { return static_cast<int>(A_.cols()); }
    int width() const { return static_cast<int>(A_.rows()); }
    int depth() const { return static_cast<int>(W_.size()); }
    int output_dim() const { return static_cast<int>(B_.rows()); }

    const Eigen::MatrixXd& A() const { return A_; }
    const std::vector<Eigen::MatrixXd>& W() const { return W_; }
    const Eigen::MatrixXd& B() const { return B_; }

    Eigen::MatrixXd& mutable_A() { return A_; }
    std::vector<Eigen::MatrixXd>& mutable_W() { return W_; }
    Eigen::MatrixXd& mutable_B() { return B_; }

    /// Output only, no tape.
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

    /// Outputs for every column of X, no tape.
    Eigen::MatrixXd apply_batch(const Eigen::MatrixXd& X) const;

  private:
    Eigen::MatrixXd A_;
    std::vector<Eigen::MatrixXd> W_;
    Eigen::MatrixXd B_;
};

/// All intermediate activations of one forward pass.
/// Invariants: h[l] = relu(g[l]) elementwise, y = B * h[L] exactly.
struct ForwardTape {
    Eigen::VectorXd x;
    std::vector<Eigen::VectorXd> g;  // pre-activations g_0..g_L
    std::vector<Eigen::VectorXd> h;  // post-activations h_0..h_L
    Eigen::VectorXd y;
};

/// Batched forward pass: one column per input.
struct BatchTape {
    Eigen::MatrixXd X;
    std::vector<Eigen::MatrixXd> G;
    std::vector<Eigen::MatrixXd> H;
    Eigen::MatrixXd Y;
};

/// Entries of A and W_l ~ N(0, 2/m); entries of B ~ N(0, 1/d).
Encoder init_encoder(int d_x, int m, int L, int d, Rng& rng);

ForwardTape forward(const Encoder& enc, const Eigen::VectorXd& x);
BatchTape forward_batch(const Encoder& enc, const Eigen::MatrixXd& X);

/// Exact gradients of <y_grad, y> w.r.t. every parameter, with the
/// subgradient convention relu'(0) = 0.
ParameterGradients backward(const Encoder& enc, const ForwardTape& tape,
                            const Eigen::VectorXd& y_grad);

/// Batched counterpart: sums <Y_grad.col(j), Y.col(j)> gradients over all
/// columns in a single fixed-order reduction.
ParameterGradients backward_batch(const Encoder& enc, const BatchTape& tape,
                                  const Eigen::MatrixXd& Y_grad);

/// Plain full-batch gradient descent update: theta -= learning_rate * grad.
Encoder sgd_step(Encoder enc, const ParameterGradients& grads, double learning_rate);

/// Binary checkpoint (magic "CBE1"); see README for the layout.
void save_encoder(const Encoder& enc, const std::string& path);
Encoder load_encoder(const std::string& path);

}  // namespace cbl
