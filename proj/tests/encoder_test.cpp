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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

namespace {

using cbl::Encoder;
using cbl::ForwardTape;
using cbl::ParameterGradients;
using cbl::Rng;

Eigen::VectorXd random_vector(int n, Rng& rng) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.normal();
    return v;
}

/// Input whose forward pass stays away from ReLU kinks, so finite
/// differences are valid.
Eigen::VectorXd kink_free_input(const Encoder& enc, Rng& rng, double margin = 1e-4) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Eigen::VectorXd x = random_vector(enc.input_dim(), rng);
        const ForwardTape tape = forward(enc, x);
        double min_abs = std::numeric_limits<double>::infinity();
        for (const auto& g : tape.g) min_abs = std::min(min_abs, g.cwiseAbs().minCoeff());
        if (min_abs > margin) return x;
    }
    throw std::runtime_error("could not find kink-free input");
}

/// Straightforward scalar-loop re-evaluation, independent of the Eigen path.
std::vector<double> naive_forward(const Encoder& enc, const Eigen::VectorXd& x) {
    std::vector<double> h(enc.width());
    for (int r = 0; r < enc.width(); ++r) {
        double s = 0.0;
        for (int c = 0; c < enc.input_dim(); ++c) s += enc.A()(r, c) * x[c];
        h[r] = s > 0.0 ? s : 0.0;
    }
    for (const auto& w : enc.W()) {
        std::vector<double> next(enc.width());
        for (int r = 0; r < enc.width(); ++r) {
            double s = 0.0;
            for (int c = 0; c < enc.width(); ++c) s += w(r, c) * h[c];
            next[r] = s > 0.0 ? s : 0.0;
        }
        h = next;
    }
    std::vector<double> y(enc.output_dim());
    for (int r = 0; r < enc.output_dim(); ++r) {
        double s = 0.0;
        for (int c = 0; c < enc.width(); ++c) s += enc.B()(r, c) * h[c];
        y[r] = s;
    }
    return y;
}

double directional_value(const Encoder& enc, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y_grad) {
    return y_grad.dot(enc.apply(x));
}

TEST(InitEncoder, HiddenVarianceMatchesScheme) {
    Rng rng(1);
    const Encoder enc = init_encoder(8, 1000, 2, 4, rng);
    const auto& w = enc.W()[0];
    const double n = static_cast<double>(w.size());
    const double mean = w.sum() / n;
    const double var = (w.array() - mean).square().sum() / (n - 1.0);
    EXPECT_NEAR(var, 2.0 / 1000.0, 0.1 * 2.0 / 1000.0);  // within 10%
}

TEST(InitEncoder, OutputVarianceMatchesScheme) {
    Rng rng(2);
    const Encoder enc = init_encoder(8, 400, 1, 64, rng);
    const auto& b = enc.B();
    const double n = static_cast<double>(b.size());
    const double mean = b.sum() / n;
    const double var = (b.array() - mean).square().sum() / (n - 1.0);
    EXPECT_NEAR(var, 1.0 / 64.0, 0.1 / 64.0);
}

TEST(InitEncoder, DeterministicUnderSeed) {
    Rng a(3), b(3);
    const Encoder e1 = init_encoder(4, 16, 2, 3, a);
    const Encoder e2 = init_encoder(4, 16, 2, 3, b);
    EXPECT_EQ(e1.A(), e2.A());
    EXPECT_EQ(e1.B(), e2.B());
    for (int l = 0; l < e1.depth(); ++l) EXPECT_EQ(e1.W()[l], e2.W()[l]);
}

TEST(InitEncoder, RejectsZeroDimensions) {
    Rng rng(4);
    EXPECT_THROW(init_encoder(0, 8, 1, 2, rng), std::invalid_argument);
    EXPECT_THROW(init_encoder(4, 0, 1, 2, rng), std::invalid_argument);
    EXPECT_THROW(init_encoder(4, 8, 0, 2, rng), std::invalid_argument);
    EXPECT_THROW(init_encoder(4, 8, 1, 0, rng), std::invalid_argument);
}

TEST(Forward, ZeroInputGivesZeroOutput) {
    Rng rng(5);
    const Encoder enc = init_encoder(6, 12, 2, 3, rng);
    const ForwardTape tape = forward(enc, Eigen::VectorXd::Zero(6));
    EXPECT_EQ(tape.y, Eigen::VectorXd::Zero(3));
    for (const auto& g : tape.g) EXPECT_EQ(g, Eigen::VectorXd::Zero(12));
}

TEST(Forward, IdentityNetworkPassesNonnegativeInput) {
    const int n = 5;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    const Encoder enc(eye, {eye}, eye);
    Eigen::VectorXd x(n);
    x << 0.0, 0.5, 1.5, 2.0, 0.25;
    EXPECT_EQ(forward(enc, x).y, x);
}

TEST(Forward, MatchesNaiveReEvaluation) {
    Rng rng(6);
    const Encoder enc = init_encoder(7, 24, 3, 5, rng);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd x = random_vector(7, rng);
        const ForwardTape tape = forward(enc, x);
        const auto naive = naive_forward(enc, x);
        for (int i = 0; i < 5; ++i)
            EXPECT_NEAR(tape.y[i], naive[i], 1e-12 * std::max(1.0, std::abs(naive[i])));
    }
}

TEST(Forward, TapeInvariantsExact) {
    Rng rng(7);
    const Encoder enc = init_encoder(6, 16, 2, 4, rng);
    const Eigen::VectorXd x = random_vector(6, rng);
    const ForwardTape tape = forward(enc, x);
    ASSERT_EQ(tape.g.size(), tape.h.size());
    for (std::size_t l = 0; l < tape.g.size(); ++l)
        EXPECT_EQ(tape.h[l], tape.g[l].cwiseMax(0.0));
    EXPECT_EQ(tape.y, enc.B() * tape.h.back());
}

TEST(Forward, PositiveHomogeneity) {
    Rng rng(8);
    const Encoder enc = init_encoder(6, 16, 2, 4, rng);
    const Eigen::VectorXd x = random_vector(6, rng);
    const ForwardTape base = forward(enc, x);

    // Doubling is exact in binary floating point.
    const ForwardTape doubled = forward(enc, (2.0 * x).eval());
    EXPECT_EQ(doubled.y, (2.0 * base.y).eval());

    const double alpha = 1.7;
    const ForwardTape scaled = forward(enc, (alpha * x).eval());
    for (int i = 0; i < 4; ++i)
        EXPECT_NEAR(scaled.y[i], alpha * base.y[i], 1e-12 * std::max(1.0, std::abs(base.y[i])));
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
    Rng rng(9);
    const Encoder enc = init_encoder(5, 10, 2, 3, rng);
    const ForwardTape tape = forward(enc, random_vector(5, rng));
    const ParameterGradients grads = backward(enc, tape, Eigen::VectorXd::Zero(3));
    EXPECT_EQ(grads.squared_norm(), 0.0);
}

TEST(Backward, LinearInUpstreamGradient) {
    Rng rng(10);
    const Encoder enc = init_encoder(5, 10, 2, 3, rng);
    const ForwardTape tape = forward(enc, random_vector(5, rng));
    const Eigen::VectorXd y_grad = random_vector(3, rng);
    const ParameterGradients g1 = backward(enc, tape, y_grad);

    // Scaling by 2 is exact in binary floating point, so bitwise equality.
    const ParameterGradients g2 = backward(enc, tape, (2.0 * y_grad).eval());
    EXPECT_EQ(g2.A, (2.0 * g1.A).eval());
    EXPECT_EQ(g2.B, (2.0 * g1.B).eval());
    for (int l = 0; l < enc.depth(); ++l) EXPECT_EQ(g2.W[l], (2.0 * g1.W[l]).eval());

    const ParameterGradients g3 = backward(enc, tape, (3.0 * y_grad).eval());
    const double scale = std::max(1.0, g1.norm());
    EXPECT_NEAR((g3.A - 3.0 * g1.A).cwiseAbs().maxCoeff(), 0.0, 1e-12 * scale);
    EXPECT_NEAR((g3.B - 3.0 * g1.B).cwiseAbs().maxCoeff(), 0.0, 1e-12 * scale);
    for (int l = 0; l < enc.depth(); ++l)
        EXPECT_NEAR((g3.W[l] - 3.0 * g1.W[l]).cwiseAbs().maxCoeff(), 0.0, 1e-12 * scale);
}

TEST(Backward, MatchesCentralFiniteDifferences) {
    // Acceptance-grade configuration: d_x=8, m=32, L=3, d=4, 20 probes,
    // step 1e-5, relative error <= 1e-6, away from ReLU kinks.
    Rng rng(11);
    const Encoder enc = init_encoder(8, 32, 3, 4, rng);
    const double step = 1e-5;
    double max_rel_err = 0.0;

    for (int probe = 0; probe < 20; ++probe) {
        const Eigen::VectorXd x = kink_free_input(enc, rng);
        const Eigen::VectorXd y_grad = random_vector(4, rng);
        const ForwardTape tape = forward(enc, x);
        const ParameterGradients grads = backward(enc, tape, y_grad);

        auto check_matrix = [&](const Eigen::MatrixXd& grad, auto&& mutate) {
            for (int probe_coord = 0; probe_coord < 3; ++probe_coord) {
                const int r = static_cast<int>(rng.uniform_int(grad.rows()));
                const int c = static_cast<int>(rng.uniform_int(grad.cols()));
                Encoder hi = enc, lo = enc;
                mutate(hi, r, c, step);
                mutate(lo, r, c, -step);
                const double fd = (directional_value(hi, x, y_grad) -
                                   directional_value(lo, x, y_grad)) /
                                  (2.0 * step);
                const double rel = std::abs(grad(r, c) - fd) /
                                   std::max(1e-12, std::abs(fd));
                max_rel_err = std::max(max_rel_err, rel);
            }
        };
        check_matrix(grads.A, [](Encoder& e, int r, int c, double h) { e.mutable_A()(r, c) += h; });
        check_matrix(grads.B, [](Encoder& e, int r, int c, double h) { e.mutable_B()(r, c) += h; });
        for (int l = 0; l < enc.depth(); ++l)
            check_matrix(grads.W[l],
                         [l](Encoder& e, int r, int c, double h) { e.mutable_W()[l](r, c) += h; });
    }
    EXPECT_LE(max_rel_err, 1e-6);
}

TEST(BatchOps, ForwardBatchMatchesPerSample) {
    Rng rng(12);
    const Encoder enc = init_encoder(6, 20, 2, 4, rng);
    Eigen::MatrixXd X(6, 9);
    for (int j = 0; j < 9; ++j) X.col(j) = random_vector(6, rng);
    const cbl::BatchTape batch = forward_batch(enc, X);
    for (int j = 0; j < 9; ++j) {
        const ForwardTape tape = forward(enc, X.col(j));
        for (int i = 0; i < 4; ++i)
            EXPECT_NEAR(batch.Y(i, j), tape.y[i], 1e-12 * std::max(1.0, std::abs(tape.y[i])));
    }
}

TEST(BatchOps, BackwardBatchMatchesPerSampleSum) {
    Rng rng(13);
    const Encoder enc = init_encoder(6, 20, 2, 4, rng);
    Eigen::MatrixXd X(6, 7), Y_grad(4, 7);
    for (int j = 0; j < 7; ++j) {
        X.col(j) = random_vector(6, rng);
        Y_grad.col(j) = random_vector(4, rng);
    }
    const ParameterGradients batched = backward_batch(enc, forward_batch(enc, X), Y_grad);
    ParameterGradients summed = ParameterGradients::zeros_like(enc);
    for (int j = 0; j < 7; ++j)
        summed.accumulate(backward(enc, forward(enc, X.col(j)), Y_grad.col(j)));

    const double scale = std::max(1.0, summed.norm());
    EXPECT_NEAR((batched.A - summed.A).cwiseAbs().maxCoeff(), 0.0, 1e-12 * scale);
    EXPECT_NEAR((batched.B - summed.B).cwiseAbs().maxCoeff(), 0.0, 1e-12 * scale);
    for (int l = 0; l < enc.depth(); ++l)
        EXPECT_NEAR((batched.W[l] - summed.W[l]).cwiseAbs().maxCoeff(), 0.0, 1e-12 * scale);
}

TEST(SgdStep, ZeroRateLeavesParametersUnchanged) {
    Rng rng(14);
    const Encoder enc = init_encoder(4, 8, 1, 2, rng);
    ParameterGradients grads = ParameterGradients::zeros_like(enc);
    grads.A.setConstant(1.0);
    const Encoder stepped = sgd_step(enc, grads, 0.0);
    EXPECT_EQ(stepped.A(), enc.A());
}

TEST(SgdStep, OppositeStepsRestoreParameters) {
    Rng rng(15);
    const Encoder enc = init_encoder(4, 8, 1, 2, rng);
    ParameterGradients grads = ParameterGradients::zeros_like(enc);
    for (int r = 0; r < grads.A.rows(); ++r)
        for (int c = 0; c < grads.A.cols(); ++c) grads.A(r, c) = rng.normal();
    ParameterGradients negated = grads;
    negated.scale(-1.0);

    const Encoder restored = sgd_step(sgd_step(enc, grads, 0.03), negated, 0.03);
    EXPECT_NEAR((restored.A() - enc.A()).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(SgdStep, MatchesClosedFormOnQuadratic) {
    // f(theta) = (theta - c)^2 / 2 on a 1x1 parameter: the iterates satisfy
    // theta_t - c = (1 - nu)^t (theta_0 - c).
    const double c = 0.75, nu = 0.2, theta0 = -1.0;
    Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    Encoder enc(Eigen::MatrixXd::Constant(1, 1, theta0), {one}, one);
    for (int t = 0; t < 10; ++t) {
        ParameterGradients grads = ParameterGradients::zeros_like(enc);
        grads.A(0, 0) = enc.A()(0, 0) - c;
        enc = sgd_step(std::move(enc), grads, nu);
    }
    const double expected = c + std::pow(1.0 - nu, 10) * (theta0 - c);
    EXPECT_NEAR(enc.A()(0, 0), expected, 1e-12);
}

TEST(Checkpoint, RoundTripBitExact) {
    Rng rng(16);
    const Encoder enc = init_encoder(5, 12, 2, 3, rng);
    const std::string path = testing::TempDir() + "/enc.cbe";
    save_encoder(enc, path);
    const Encoder loaded = cbl::load_encoder(path);
    EXPECT_EQ(loaded.A(), enc.A());
    EXPECT_EQ(loaded.B(), enc.B());
    ASSERT_EQ(loaded.depth(), enc.depth());
    for (int l = 0; l < enc.depth(); ++l) EXPECT_EQ(loaded.W()[l], enc.W()[l]);
    std::remove(path.c_str());
}

TEST(Checkpoint, BadMagicRejected) {
    const std::string path = testing::TempDir() + "/enc_bad.cbe";
    FILE* f = std::fopen(path.c_str(), "wb");
    ASSERT_NE(f, nullptr);
    std::fwrite("NOPE", 1, 4, f);
    std::fclose(f);
    EXPECT_THROW(cbl::load_encoder(path), std::runtime_error);
    std::remove(path.c_str());
}

}  // namespace
