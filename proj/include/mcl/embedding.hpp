// Normalization, similarity and distribution primitives shared by every loss.
#pragma once

#include <cmath>

#include "mcl/types.hpp"

namespace mcl {

// Row-wise L2 normalization. Zero rows are an error, not silently perturbed.
template <class Derived>
Mat<typename Derived::Scalar> l2_normalize(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    if (x.rows() < 1 || x.cols() < 1)
        throw DegenerateInputError("l2_normalize: need n >= 1 and d > 0");
    Mat<Scalar> out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Scalar n = x.row(i).norm();
        if (!(n > Scalar(0)))
            throw DegenerateInputError("l2_normalize: row " + std::to_string(i) + " has zero norm");
        out.row(i) = x.row(i) / n;
    }
    return out;
}

// Backward pass of row-wise L2 normalization: given y = x/||x|| and dL/dy,
// returns dL/dx = (dL/dy - (y . dL/dy) y) / ||x||.
template <class Scalar>
Mat<Scalar> l2_normalize_backward(const Mat<Scalar>& x, const Mat<Scalar>& y,
                                  const Mat<Scalar>& dy) {
    Mat<Scalar> dx(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Scalar n = x.row(i).norm();
        const Scalar dot = y.row(i).dot(dy.row(i));
        dx.row(i) = (dy.row(i) - dot * y.row(i)) / n;
    }
    return dx;
}

// Entry k is (anchor . contrast_k) / temperature.
template <class DA, class DC>
Vec<typename DA::Scalar> similarity_logits(const Eigen::MatrixBase<DA>& anchor,
                                           const Eigen::MatrixBase<DC>& contrast,
                                           typename DA::Scalar temperature) {
    using Scalar = typename DA::Scalar;
    if (!(temperature > Scalar(0)))
        throw ParameterError("similarity_logits: temperature must be > 0");
    if (anchor.size() != contrast.cols())
        throw ContractViolation("similarity_logits: anchor dim " + std::to_string(anchor.size()) +
                                " != contrast dim " + std::to_string(contrast.cols()));
    Vec<Scalar> v = contrast * anchor.reshaped(anchor.size(), 1);
    return v / temperature;
}

// Numerically stable softmax (max subtraction before exponentiation).
template <class Derived>
Vec<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    const Scalar mx = logits.maxCoeff();
    Vec<Scalar> e = (logits.array() - mx).exp();
    return e / e.sum();
}

template <class Derived>
Vec<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    const Scalar mx = logits.maxCoeff();
    const Scalar lse = std::log((logits.array() - mx).exp().sum()) + mx;
    return logits.array() - lse;
}

template <class Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    const Scalar mx = logits.maxCoeff();
    return std::log((logits.array() - mx).exp().sum()) + mx;
}

// Softmax over similarity_logits. Candidate 0 is the positive.
template <class DA, class DC>
ContrastiveDistribution<typename DA::Scalar> contrastive_distribution(
    const Eigen::MatrixBase<DA>& anchor, const Eigen::MatrixBase<DC>& contrast,
    typename DA::Scalar temperature, int anchor_network = 0, int contrast_network = 0) {
    using Scalar = typename DA::Scalar;
    ContrastiveDistribution<Scalar> dist;
    dist.logits = similarity_logits(anchor, contrast, temperature);
    dist.probs = softmax(dist.logits);
    dist.temperature = temperature;
    dist.anchor_network = anchor_network;
    dist.contrast_network = contrast_network;
    return dist;
}

}  // namespace mcl
