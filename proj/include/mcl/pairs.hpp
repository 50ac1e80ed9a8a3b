// Anchor/positive/negative tuple construction for supervised (class-aware
// batches) and self-supervised (two-view) regimes.
#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <vector>

#include "mcl/types.hpp"

namespace mcl {

using Rng = std::mt19937_64;

// Draws B/2 distinct classes and 2 distinct samples per class. Partners are
// adjacent in the returned list (2i, 2i+1 share a class).
inline std::vector<int> class_aware_batch(const std::vector<int>& dataset_labels, int batch_size,
                                          Rng& rng) {
    if (batch_size < 2 || batch_size % 2 != 0)
        throw ParameterError("class_aware_batch: batch size must be even and >= 2");
    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < static_cast<int>(dataset_labels.size()); ++i)
        by_class[dataset_labels[i]].push_back(i);
    std::vector<int> eligible;
    for (const auto& [cls, ids] : by_class)
        if (ids.size() >= 2) eligible.push_back(cls);
    const int need = batch_size / 2;
    if (static_cast<int>(eligible.size()) < need)
        throw SamplingError("class_aware_batch: need " + std::to_string(need) +
                            " classes with >= 2 samples, have " + std::to_string(eligible.size()) +
                            " (short by " + std::to_string(need - int(eligible.size())) + ")");
    std::shuffle(eligible.begin(), eligible.end(), rng);
    std::vector<int> batch;
    batch.reserve(batch_size);
    for (int c = 0; c < need; ++c) {
        const auto& ids = by_class[eligible[c]];
        // two distinct indices within the class
        std::uniform_int_distribution<size_t> d1(0, ids.size() - 1);
        const size_t i = d1(rng);
        std::uniform_int_distribution<size_t> d2(0, ids.size() - 2);
        size_t j = d2(rng);
        if (j >= i) ++j;
        batch.push_back(ids[i]);
        batch.push_back(ids[j]);
    }
    return batch;
}

inline std::vector<int> class_aware_batch(const std::vector<int>& dataset_labels, int batch_size,
                                          uint64_t rng_seed) {
    Rng rng(rng_seed);
    return class_aware_batch(dataset_labels, batch_size, rng);
}

// One tuple per sample: positive is the same-class partner, negatives are the
// B-2 remaining samples, so K = B - 2. Ids index positions WITHIN the batch.
inline std::vector<ContrastiveTuple> tuples_from_class_batch(const std::vector<int>& batch_labels) {
    const int B = static_cast<int>(batch_labels.size());
    std::vector<ContrastiveTuple> tuples;
    tuples.reserve(B);
    for (int i = 0; i < B; ++i) {
        ContrastiveTuple t;
        t.anchor_id = i;
        t.positive_id = -1;
        for (int j = 0; j < B; ++j) {
            if (j == i) continue;
            if (batch_labels[j] == batch_labels[i]) {
                if (t.positive_id != -1)
                    throw ContractViolation(
                        "tuples_from_class_batch: more than 2 samples of class " +
                        std::to_string(batch_labels[i]) + " in batch");
                t.positive_id = j;
            } else {
                t.negative_ids.push_back(j);
            }
        }
        if (t.positive_id == -1)
            throw ContractViolation("tuples_from_class_batch: sample " + std::to_string(i) +
                                    " has no same-class partner");
        tuples.push_back(std::move(t));
    }
    return tuples;
}

// Self-supervised pairing: anchor = view-1 embedding of an instance,
// positive = view-2 embedding of the same instance. Pool layout is
// [n view-2 rows, then negatives_source rows].
inline std::vector<ContrastiveTuple> two_view_tuples(const std::vector<int>& view1_ids,
                                                     const std::vector<int>& view2_ids,
                                                     int num_negatives) {
    if (view1_ids != view2_ids)
        throw ContractViolation("two_view_tuples: view lists are not aligned by instance");
    if (num_negatives < 1) throw ContractViolation("two_view_tuples: need K >= 1 negatives");
    const int n = static_cast<int>(view1_ids.size());
    std::vector<ContrastiveTuple> tuples(n);
    for (int i = 0; i < n; ++i) {
        tuples[i].anchor_id = i;
        tuples[i].positive_id = i;
        tuples[i].negative_ids.resize(num_negatives);
        for (int k = 0; k < num_negatives; ++k) tuples[i].negative_ids[k] = n + k;
    }
    return tuples;
}

// Audits the supervised tuple invariants against labels; throws on violation.
inline void audit_supervised_tuples(const std::vector<ContrastiveTuple>& tuples,
                                    const std::vector<int>& labels) {
    for (const auto& t : tuples) {
        if (t.anchor_id == t.positive_id)
            throw ContractViolation("tuple audit: anchor == positive");
        if (labels[t.anchor_id] != labels[t.positive_id])
            throw ContractViolation("tuple audit: positive label differs from anchor");
        for (int n : t.negative_ids) {
            if (n == t.anchor_id || n == t.positive_id)
                throw ContractViolation("tuple audit: negative collides with anchor/positive");
            if (labels[n] == labels[t.anchor_id])
                throw ContractViolation("tuple audit: negative shares the anchor class");
        }
    }
}

}  // namespace mcl
