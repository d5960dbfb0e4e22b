#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "goldsift/errors.hpp"

namespace goldsift {

// Matrices follow the column-token convention: X_ins / X_test hold one
// token vector per column, projections are d_out x d_in, and the attention
// output has one column per test query.
struct AttentionInstance {
    Eigen::MatrixXd W_K;
    Eigen::MatrixXd W_V;
    Eigen::MatrixXd W_Q;
    Eigen::MatrixXd X_ins;   // d_in x n_ins, n_ins may be 0
    Eigen::MatrixXd X_test;  // d_in x n_test, n_test >= 1

    Eigen::Index d_in() const { return W_K.cols(); }
    Eigen::Index d_out() const { return W_K.rows(); }
    Eigen::Index n_ins() const { return X_ins.cols(); }
    Eigen::Index n_test() const { return X_test.cols(); }

    void validate() const {
        if (W_K.rows() != W_V.rows() || W_K.rows() != W_Q.rows() ||
            W_K.cols() != W_V.cols() || W_K.cols() != W_Q.cols()) {
            throw DataError("projection matrices must share the d_out x d_in shape");
        }
        if (X_ins.rows() != d_in() && n_ins() > 0) {
            throw DataError("X_ins row count must equal d_in");
        }
        if (X_test.rows() != d_in()) {
            throw DataError("X_test row count must equal d_in");
        }
        if (n_test() < 1) {
            throw DataError("X_test needs at least one column");
        }
        if (!W_K.allFinite() || !W_V.allFinite() || !W_Q.allFinite() ||
            !X_ins.allFinite() || !X_test.allFinite()) {
            throw DataError("attention instance contains non-finite entries");
        }
    }
};

struct LinearDecomposition {
    Eigen::MatrixXd joint;     // attention over [X_ins || X_test], softmax removed
    Eigen::MatrixXd zsl_part;  // test-input-only term
    Eigen::MatrixXd iit_part;  // demonstration-only term
};

// With the softmax removed, attention over the concatenated sequence splits
// exactly into a test-only term and a demonstration-only term: the
// concatenated outer product W_V X (W_K X)^T is the sum of the per-block
// outer products.
inline LinearDecomposition linear_decompose(const AttentionInstance& inst) {
    inst.validate();
    const Eigen::MatrixXd Q = inst.W_Q * inst.X_test;

    Eigen::MatrixXd X_all(inst.d_in(), inst.n_ins() + inst.n_test());
    if (inst.n_ins() > 0) X_all.leftCols(inst.n_ins()) = inst.X_ins;
    X_all.rightCols(inst.n_test()) = inst.X_test;

    LinearDecomposition out;
    out.joint = (inst.W_V * X_all) * (inst.W_K * X_all).transpose() * Q;
    out.zsl_part = (inst.W_V * inst.X_test) * (inst.W_K * inst.X_test).transpose() * Q;
    out.iit_part = (inst.W_V * inst.X_ins) * (inst.W_K * inst.X_ins).transpose() * Q;
    return out;
}

inline double decomposition_residual(const LinearDecomposition& d) {
    double denom = d.joint.norm();
    if (denom == 0.0) return (d.zsl_part + d.iit_part).norm();
    return (d.joint - d.zsl_part - d.iit_part).norm() / denom;
}

// Frobenius-relative difference between softmax attention and its linear
// (softmax-free) form, with the 1/scale factor applied to both. Reported,
// never asserted against a threshold.
inline double softmax_gap(const AttentionInstance& inst, double scale = 0.0) {
    inst.validate();
    if (scale == 0.0) scale = std::sqrt(static_cast<double>(inst.d_in()));
    if (!(scale > 0.0)) throw ConfigError("softmax scale must be positive");

    const Eigen::MatrixXd Q = inst.W_Q * inst.X_test;
    Eigen::MatrixXd X_all(inst.d_in(), inst.n_ins() + inst.n_test());
    if (inst.n_ins() > 0) X_all.leftCols(inst.n_ins()) = inst.X_ins;
    X_all.rightCols(inst.n_test()) = inst.X_test;

    const Eigen::MatrixXd V = inst.W_V * X_all;
    Eigen::MatrixXd scores = (inst.W_K * X_all).transpose() * Q / scale;

    // Column-wise softmax over the keys, max-subtracted for stability.
    Eigen::MatrixXd probs = scores;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
        double mx = probs.col(c).maxCoeff();
        probs.col(c) = (probs.col(c).array() - mx).exp();
        probs.col(c) /= probs.col(c).sum();
    }

    Eigen::MatrixXd softmax_out = V * probs;
    Eigen::MatrixXd linear_out = V * scores;

    double denom = softmax_out.norm();
    if (denom == 0.0) return linear_out.norm();
    return (softmax_out - linear_out).norm() / denom;
}

// Column-wise softmax attention output by itself, for degenerate-case checks.
inline Eigen::MatrixXd softmax_attention(const AttentionInstance& inst, double scale = 0.0) {
    inst.validate();
    if (scale == 0.0) scale = std::sqrt(static_cast<double>(inst.d_in()));

    const Eigen::MatrixXd Q = inst.W_Q * inst.X_test;
    Eigen::MatrixXd X_all(inst.d_in(), inst.n_ins() + inst.n_test());
    if (inst.n_ins() > 0) X_all.leftCols(inst.n_ins()) = inst.X_ins;
    X_all.rightCols(inst.n_test()) = inst.X_test;

    Eigen::MatrixXd scores = (inst.W_K * X_all).transpose() * Q / scale;
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
        double mx = scores.col(c).maxCoeff();
        scores.col(c) = (scores.col(c).array() - mx).exp();
        scores.col(c) /= scores.col(c).sum();
    }
    return (inst.W_V * X_all) * scores;
}

namespace detail {

// Standard normal via Box-Muller on raw mt19937_64 draws, so instances are
// reproducible independent of the standard library in use.
inline double standard_normal(std::mt19937_64& rng) {
    double u1 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                                     std::mt19937_64& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = standard_normal(rng);
        }
    }
    return m;
}

}  // namespace detail

inline AttentionInstance random_instance(Eigen::Index d_in, Eigen::Index d_out,
                                         Eigen::Index n_ins, Eigen::Index n_test,
                                         std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    AttentionInstance inst;
    inst.W_K = detail::random_matrix(d_out, d_in, rng);
    inst.W_V = detail::random_matrix(d_out, d_in, rng);
    inst.W_Q = detail::random_matrix(d_out, d_in, rng);
    inst.X_ins = detail::random_matrix(d_in, n_ins, rng);
    inst.X_test = detail::random_matrix(d_in, n_test, rng);
    inst.validate();
    return inst;
}

// The duality-demo payload: decomposition residual at double precision plus
// softmax gap measurements, including a sweep that scales the key inputs
// toward zero (softmax then approaches uniform weighting).
inline nlohmann::json duality_report(Eigen::Index d_in, Eigen::Index d_out, Eigen::Index n_ins,
                                     Eigen::Index n_test, std::uint64_t seed,
                                     double scale = 0.0) {
    AttentionInstance inst = random_instance(d_in, d_out, n_ins, n_test, seed);
    LinearDecomposition decomp = linear_decompose(inst);
    double effective_scale = scale == 0.0 ? std::sqrt(static_cast<double>(d_in)) : scale;

    nlohmann::json j;
    j["instance"] = {{"d_in", d_in}, {"d_out", d_out}, {"n_ins", n_ins},
                     {"n_test", n_test}, {"seed", seed}};
    j["decomposition_residual"] = decomposition_residual(decomp);
    j["softmax_gap"] = {{"scale", effective_scale}, {"gap", softmax_gap(inst, effective_scale)}};

    nlohmann::json sweep = nlohmann::json::array();
    AttentionInstance scaled = inst;
    for (double factor : {1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625}) {
        scaled.W_K = inst.W_K * factor;
        sweep.push_back({{"key_input_factor", factor},
                         {"gap", softmax_gap(scaled, effective_scale)}});
    }
    j["key_scaling_sweep"] = std::move(sweep);
    return j;
}

}  // namespace goldsift
