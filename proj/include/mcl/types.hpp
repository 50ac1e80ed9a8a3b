// Core dense types and error taxonomy shared by every module.
#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace mcl {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matd = Mat<double>;
using Vecd = Vec<double>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Zero-norm rows, empty inputs and similar ill-posed numeric inputs.
struct DegenerateInputError : Error {
    using Error::Error;
};

// Out-of-range configuration values (temperature <= 0, K < 1, ...).
struct ParameterError : Error {
    using Error::Error;
};

// Caller broke a documented precondition (mixed network ids, M < 2, ...).
struct ContractViolation : Error {
    using Error::Error;
};

// Bad runtime data (labels out of range, shape mismatches in batches).
struct DataError : Error {
    using Error::Error;
};

// Sampler cannot satisfy a request (too few classes / candidates).
struct SamplingError : Error {
    using Error::Error;
};

// Memory bank / queue cannot supply the requested rows.
struct RetrievalError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// A verification oracle cannot produce a trustworthy value (overflow, NaN).
struct OracleError : Error {
    using Error::Error;
};

// Training aborted (non-finite loss); carries the diagnostic dump location.
struct TrainingAborted : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// L2-normalized embeddings for one batch, tagged with the producing network.
template <class Scalar>
struct EmbeddingBatch {
    Mat<Scalar> vectors;          // n x d, unit rows
    int network_id = 0;           // m in {1..M}
    std::vector<int> sample_ids;  // length n

    Eigen::Index rows() const { return vectors.rows(); }
    Eigen::Index dim() const { return vectors.cols(); }
};

template <class Scalar>
EmbeddingBatch<Scalar> make_embedding_batch(Mat<Scalar> vectors, int network_id,
                                            std::vector<int> sample_ids,
                                            Scalar norm_tol = Scalar(1e-6)) {
    if (vectors.rows() < 1 || vectors.cols() < 1)
        throw DegenerateInputError("EmbeddingBatch requires n >= 1 and d > 0");
    if (static_cast<Eigen::Index>(sample_ids.size()) != vectors.rows())
        throw ContractViolation("EmbeddingBatch sample_ids length must equal row count");
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
        const Scalar n = vectors.row(i).norm();
        if (std::abs(n - Scalar(1)) > norm_tol)
            throw DegenerateInputError("EmbeddingBatch row " + std::to_string(i) +
                                       " is not unit-normalized (norm=" + std::to_string(double(n)) + ")");
    }
    return EmbeddingBatch<Scalar>{std::move(vectors), network_id, std::move(sample_ids)};
}

// Softmax-normalized similarities over K+1 candidates at temperature tau.
// Logits are kept so losses can use log-sum-exp instead of log(prob).
template <class Scalar>
struct ContrastiveDistribution {
    Vec<Scalar> probs;    // length K+1, position 0 is the positive candidate
    Vec<Scalar> logits;   // same length, pre-softmax
    Scalar temperature = Scalar(0);
    int anchor_network = 0;
    int contrast_network = 0;

    Eigen::Index size() const { return probs.size(); }
};

// Index structure naming one anchor, one positive and K negatives within
// embedding storage (anchor_id indexes anchors, the others index the
// contrast pool).
struct ContrastiveTuple {
    int anchor_id = -1;
    int positive_id = -1;
    std::vector<int> negative_ids;

    int K() const { return static_cast<int>(negative_ids.size()); }
};

}  // namespace mcl
