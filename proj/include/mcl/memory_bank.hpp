// Fixed-capacity embedding stores: labeled FIFO ring for supervised negative
// retrieval, plain FIFO queue for self-supervised contrast embeddings.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <vector>

#include "mcl/types.hpp"

namespace mcl {

using Rng = std::mt19937_64;

template <class Scalar>
struct MemoryBank {
    Eigen::Index capacity = 0;
    Mat<Scalar> embeddings;   // capacity x d, unit rows once written
    std::vector<int> labels;  // length capacity, -1 when slot unused
    Eigen::Index write_cursor = 0;
    Eigen::Index filled = 0;

    MemoryBank() = default;
    MemoryBank(Eigen::Index cap, Eigen::Index d)
        : capacity(cap),
          embeddings(Mat<Scalar>::Zero(cap, d)),
          labels(static_cast<size_t>(cap), -1) {
        if (cap < 1 || d < 1) throw ParameterError("MemoryBank: capacity and d must be >= 1");
    }
    Eigen::Index dim() const { return embeddings.cols(); }
};

// FIFO ring write: rows land at write_cursor onward, wrapping and replacing
// the oldest entries.
template <class Scalar>
void bank_update(MemoryBank<Scalar>& bank, const Mat<Scalar>& embeddings,
                 const std::vector<int>& labels) {
    if (embeddings.cols() != bank.dim())
        throw ContractViolation("bank_update: dim mismatch (" + std::to_string(embeddings.cols()) +
                                " vs bank " + std::to_string(bank.dim()) + ")");
    if (static_cast<Eigen::Index>(labels.size()) != embeddings.rows())
        throw ContractViolation("bank_update: label count mismatch");
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
        bank.embeddings.row(bank.write_cursor) = embeddings.row(i);
        bank.labels[static_cast<size_t>(bank.write_cursor)] = labels[i];
        bank.write_cursor = (bank.write_cursor + 1) % bank.capacity;
        bank.filled = std::min(bank.filled + 1, bank.capacity);
    }
}

// Index-level draw so cohorts can realize the same tuple in every peer bank:
// one uniform positive among same-label slots, K uniform negatives without
// replacement among different-label slots.
inline std::pair<int, std::vector<int>> bank_sample_indices(const std::vector<int>& labels,
                                                            Eigen::Index filled, int anchor_label,
                                                            int K, Rng& rng) {
    std::vector<int> pos, neg;
    for (Eigen::Index i = 0; i < filled; ++i) {
        if (labels[static_cast<size_t>(i)] == anchor_label)
            pos.push_back(static_cast<int>(i));
        else
            neg.push_back(static_cast<int>(i));
    }
    if (pos.empty())
        throw RetrievalError("bank_sample: no stored embedding with label " +
                             std::to_string(anchor_label));
    if (static_cast<int>(neg.size()) < K)
        throw RetrievalError("bank_sample: need " + std::to_string(K) + " negatives, bank holds " +
                             std::to_string(neg.size()) + " (short by " +
                             std::to_string(K - int(neg.size())) + ")");
    std::uniform_int_distribution<size_t> dp(0, pos.size() - 1);
    const int positive = pos[dp(rng)];
    // partial Fisher-Yates for K draws without replacement
    for (int k = 0; k < K; ++k) {
        std::uniform_int_distribution<size_t> dn(k, neg.size() - 1);
        std::swap(neg[static_cast<size_t>(k)], neg[dn(rng)]);
    }
    neg.resize(static_cast<size_t>(K));
    return {positive, std::move(neg)};
}

template <class Scalar>
struct BankSample {
    Vec<Scalar> positive;
    Mat<Scalar> negatives;  // K x d
    int positive_index = -1;
    std::vector<int> negative_indices;
};

template <class Scalar>
BankSample<Scalar> bank_sample(const MemoryBank<Scalar>& bank, int anchor_label, int K, Rng& rng) {
    auto [p, negs] = bank_sample_indices(bank.labels, bank.filled, anchor_label, K, rng);
    BankSample<Scalar> out;
    out.positive_index = p;
    out.negative_indices = negs;
    out.positive = bank.embeddings.row(p).transpose();
    out.negatives.resize(K, bank.dim());
    for (int k = 0; k < K; ++k) out.negatives.row(k) = bank.embeddings.row(negs[k]);
    return out;
}

template <class Scalar>
BankSample<Scalar> bank_sample(const MemoryBank<Scalar>& bank, int anchor_label, int K,
                               uint64_t rng_seed) {
    Rng rng(rng_seed);
    return bank_sample(bank, anchor_label, K, rng);
}

// True when bank_sample can satisfy (1 positive, K negatives) for every class
// present; drives the CE-only cold-start rule.
template <class Scalar>
bool bank_ready(const MemoryBank<Scalar>& bank, const std::vector<int>& classes, int K) {
    std::vector<Eigen::Index> count_by_label;
    for (Eigen::Index i = 0; i < bank.filled; ++i) {
        const int l = bank.labels[static_cast<size_t>(i)];
        if (l >= static_cast<int>(count_by_label.size()))
            count_by_label.resize(static_cast<size_t>(l) + 1, 0);
        if (l >= 0) ++count_by_label[static_cast<size_t>(l)];
    }
    for (int c : classes) {
        const Eigen::Index same =
            c < static_cast<int>(count_by_label.size()) ? count_by_label[static_cast<size_t>(c)] : 0;
        if (same < 1) return false;
        if (bank.filled - same < K) return false;
    }
    return true;
}

// Debug export: header (capacity, d, filled as little-endian int64) followed
// by row-major float32 of the filled rows.
template <class Scalar>
void bank_export(const MemoryBank<Scalar>& bank, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("bank_export: cannot open " + path);
    const int64_t header[3] = {static_cast<int64_t>(bank.capacity),
                               static_cast<int64_t>(bank.dim()),
                               static_cast<int64_t>(bank.filled)};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    std::vector<float> row(static_cast<size_t>(bank.dim()));
    for (Eigen::Index i = 0; i < bank.filled; ++i) {
        for (Eigen::Index j = 0; j < bank.dim(); ++j)
            row[static_cast<size_t>(j)] = static_cast<float>(bank.embeddings(i, j));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw IoError("bank_export: write failed for " + path);
}

// Self-supervised FIFO queue of unit rows (no labels).
template <class Scalar>
struct NegativeQueue {
    Eigen::Index capacity = 0;
    Mat<Scalar> rows;
    Eigen::Index head = 0;  // next write slot
    Eigen::Index filled = 0;

    NegativeQueue() = default;
    NegativeQueue(Eigen::Index cap, Eigen::Index d)
        : capacity(cap), rows(Mat<Scalar>::Zero(cap, d)) {
        if (cap < 1 || d < 1) throw ParameterError("NegativeQueue: capacity and d must be >= 1");
    }
    Eigen::Index dim() const { return rows.cols(); }
    bool full() const { return filled == capacity; }

    void enqueue(const Mat<Scalar>& batch) {
        if (batch.cols() != dim()) throw ContractViolation("NegativeQueue: dim mismatch");
        for (Eigen::Index i = 0; i < batch.rows(); ++i) {
            rows.row(head) = batch.row(i);
            head = (head + 1) % capacity;
            filled = std::min(filled + 1, capacity);
        }
    }
};

}  // namespace mcl
