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

#include "cbl/encoder.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cbl/serialize.hpp"

namespace cbl {

namespace {

Eigen::MatrixXd gaussian_matrix(int rows, int cols, double stddev, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    // Row-major fill order so the parameter stream is independent of the
    // storage layout.
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = stddev * rng.normal();
    return m;
}

inline Eigen::ArrayXd relu_mask(const Eigen::VectorXd& g) {
    return (g.array() > 0.0).cast<double>();
}

}  // namespace

Encoder::Encoder(Eigen::MatrixXd A, std::vector<Eigen::MatrixXd> W, Eigen::MatrixXd B)
    : A_(std::move(A)), W_(std::move(W)), B_(std::move(B)) {
    const auto m = A_.rows();
    if (A_.cols() < 1 || m < 1 || B_.rows() < 1)
        throw std::invalid_argument("Encoder: all dimensions must be >= 1");
    if (B_.cols() != m) throw std::invalid_argument("Encoder: B must map width -> output_dim");
    for (const auto& w : W_)
        if (w.rows() != m || w.cols() != m)
            throw std::invalid_argument("Encoder: hidden matrices must be width x width");
    if (!A_.allFinite() || !B_.allFinite())
        throw std::invalid_argument("Encoder: parameters must be finite");
    for (const auto& w : W_)
        if (!w.allFinite()) throw std::invalid_argument("Encoder: parameters must be finite");
}

Eigen::VectorXd Encoder::apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd h = (A_ * x).cwiseMax(0.0);
    for (const auto& w : W_) h = (w * h).cwiseMax(0.0);
    return B_ * h;
}

Eigen::MatrixXd Encoder::apply_batch(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd h = (A_ * X).cwiseMax(0.0);
    for (const auto& w : W_) h = (w * h).cwiseMax(0.0);
    return B_ * h;
}

Encoder init_encoder(int d_x, int m, int L, int d, Rng& rng) {
    if (d_x < 1 || m < 1 || L < 1 || d < 1)
        throw std::invalid_argument("init_encoder: all dimensions must be >= 1");
    const double hidden_std = std::sqrt(2.0 / static_cast<double>(m));
    const double output_std = std::sqrt(1.0 / static_cast<double>(d));
    Eigen::MatrixXd A = gaussian_matrix(m, d_x, hidden_std, rng);
    std::vector<Eigen::MatrixXd> W;
    W.reserve(L);
    for (int l = 0; l < L; ++l) W.push_back(gaussian_matrix(m, m, hidden_std, rng));
    Eigen::MatrixXd B = gaussian_matrix(d, m, output_std, rng);
    return Encoder(std::move(A), std::move(W), std::move(B));
}

ForwardTape forward(const Encoder& enc, const Eigen::VectorXd& x) {
    if (x.size() != enc.input_dim())
        throw std::invalid_argument("forward: input length must equal input_dim");
    ForwardTape tape;
    tape.x = x;
    tape.g.reserve(enc.depth() + 1);
    tape.h.reserve(enc.depth() + 1);
    tape.g.push_back(enc.A() * x);
    tape.h.push_back(tape.g.back().cwiseMax(0.0));
    for (const auto& w : enc.W()) {
        tape.g.push_back(w * tape.h.back());
        tape.h.push_back(tape.g.back().cwiseMax(0.0));
    }
    tape.y = enc.B() * tape.h.back();
    return tape;
}

BatchTape forward_batch(const Encoder& enc, const Eigen::MatrixXd& X) {
    if (X.rows() != enc.input_dim())
        throw std::invalid_argument("forward_batch: input rows must equal input_dim");
    BatchTape tape;
    tape.X = X;
    tape.G.reserve(enc.depth() + 1);
    tape.H.reserve(enc.depth() + 1);
    tape.G.push_back(enc.A() * X);
    tape.H.push_back(tape.G.back().cwiseMax(0.0));
    for (const auto& w : enc.W()) {
        tape.G.push_back(w * tape.H.back());
        tape.H.push_back(tape.G.back().cwiseMax(0.0));
    }
    tape.Y = enc.B() * tape.H.back();
    return tape;
}

ParameterGradients backward(const Encoder& enc, const ForwardTape& tape,
                            const Eigen::VectorXd& y_grad) {
    if (y_grad.size() != enc.output_dim())
        throw std::invalid_argument("backward: y_grad length must equal output_dim");
    const int L = enc.depth();
    ParameterGradients grads;
    grads.W.resize(L);

    grads.B = y_grad * tape.h[L].transpose();
    Eigen::VectorXd delta =
        (enc.B().transpose() * y_grad).cwiseProduct(relu_mask(tape.g[L]).matrix());
    for (int l = L; l >= 1; --l) {
        grads.W[l - 1] = delta * tape.h[l - 1].transpose();
        delta = (enc.W()[l - 1].transpose() * delta)
                    .cwiseProduct(relu_mask(tape.g[l - 1]).matrix());
    }
    grads.A = delta * tape.x.transpose();
    return grads;
}

ParameterGradients backward_batch(const Encoder& enc, const BatchTape& tape,
                                  const Eigen::MatrixXd& Y_grad) {
    if (Y_grad.rows() != enc.output_dim() || Y_grad.cols() != tape.Y.cols())
        throw std::invalid_argument("backward_batch: Y_grad shape mismatch");
    const int L = enc.depth();
    ParameterGradients grads;
    grads.W.resize(L);

    grads.B = Y_grad * tape.H[L].transpose();
    Eigen::MatrixXd delta =
        (enc.B().transpose() * Y_grad).cwiseProduct((tape.G[L].array() > 0.0).cast<double>().matrix());
    for (int l = L; l >= 1; --l) {
        grads.W[l - 1] = delta * tape.H[l - 1].transpose();
        delta = (enc.W()[l - 1].transpose() * delta)
                    .cwiseProduct((tape.G[l - 1].array() > 0.0).cast<double>().matrix());
    }
    grads.A = delta * tape.X.transpose();
    return grads;
}

ParameterGradients ParameterGradients::zeros_like(const Encoder& enc) {
    ParameterGradients g;
    g.A = Eigen::MatrixXd::Zero(enc.width(), enc.input_dim());
    g.W.reserve(enc.depth());
    for (int l = 0; l < enc.depth(); ++l)
        g.W.push_back(Eigen::MatrixXd::Zero(enc.width(), enc.width()));
    g.B = Eigen::MatrixXd::Zero(enc.output_dim(), enc.width());
    return g;
}

void ParameterGradients::accumulate(const ParameterGradients& other) {
    A += other.A;
    for (std::size_t l = 0; l < W.size(); ++l) W[l] += other.W[l];
    B += other.B;
}

void ParameterGradients::scale(double factor) {
    A *= factor;
    for (auto& w : W) w *= factor;
    B *= factor;
}

double ParameterGradients::squared_norm() const {
    double s = A.squaredNorm() + B.squaredNorm();
    for (const auto& w : W) s += w.squaredNorm();
    return s;
}

double ParameterGradients::norm() const { return std::sqrt(squared_norm()); }

Encoder sgd_step(Encoder enc, const ParameterGradients& grads, double learning_rate) {
    if (learning_rate < 0.0) throw std::invalid_argument("sgd_step: learning_rate must be >= 0");
    if (grads.A.rows() != enc.width() || grads.A.cols() != enc.input_dim() ||
        static_cast<int>(grads.W.size()) != enc.depth() || grads.B.rows() != enc.output_dim())
        throw std::invalid_argument("sgd_step: gradient shapes do not match encoder");
    enc.mutable_A() -= learning_rate * grads.A;
    for (int l = 0; l < enc.depth(); ++l) enc.mutable_W()[l] -= learning_rate * grads.W[l];
    enc.mutable_B() -= learning_rate * grads.B;
    return enc;
}

namespace {

void write_matrix_row_major(std::ostream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) detail::write_f64(out, m(r, c));
}

Eigen::MatrixXd read_matrix_row_major(std::istream& in, int rows, int cols,
                                      const std::string& path) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = detail::read_f64(in, path);
    return m;
}

}  // namespace

void save_encoder(const Encoder& enc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_encoder: cannot open " + path);
    detail::write_magic(out, "CBE1");
    detail::write_u32(out, 1);  // version
    detail::write_u32(out, static_cast<std::uint32_t>(enc.input_dim()));
    detail::write_u32(out, static_cast<std::uint32_t>(enc.width()));
    detail::write_u32(out, static_cast<std::uint32_t>(enc.depth()));
    detail::write_u32(out, static_cast<std::uint32_t>(enc.output_dim()));
    write_matrix_row_major(out, enc.A());
    for (const auto& w : enc.W()) write_matrix_row_major(out, w);
    write_matrix_row_major(out, enc.B());
    if (!out) throw std::runtime_error("save_encoder: write failed for " + path);
}

Encoder load_encoder(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_encoder: cannot open " + path);
    detail::expect_magic(in, "CBE1", path);
    const std::uint32_t version = detail::read_u32(in, path);
    if (version != 1)
        throw std::runtime_error("load_encoder: unsupported version " + std::to_string(version));
    const int d_x = static_cast<int>(detail::read_u32(in, path));
    const int m = static_cast<int>(detail::read_u32(in, path));
    const int L = static_cast<int>(detail::read_u32(in, path));
    const int d = static_cast<int>(detail::read_u32(in, path));
    Eigen::MatrixXd A = read_matrix_row_major(in, m, d_x, path);
    std::vector<Eigen::MatrixXd> W;
    W.reserve(L);
    for (int l = 0; l < L; ++l) W.push_back(read_matrix_row_major(in, m, m, path));
    Eigen::MatrixXd B = read_matrix_row_major(in, d, m, path);
    return Encoder(std::move(A), std::move(W), std::move(B));
}

}  // namespace cbl
