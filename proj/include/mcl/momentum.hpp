// MoCo-style machinery for self-supervised MCL: per-peer momentum encoders
// (EMA parameter copies, never gradient-updated) and FIFO negative queues.
#pragma once

#include <vector>

#include "mcl/cohort.hpp"
#include "mcl/losses.hpp"
#include "mcl/memory_bank.hpp"
#include "mcl/optimizer.hpp"
#include "mcl/pairs.hpp"

namespace mcl {

// theta' <- c * theta' + (1 - c) * theta, elementwise over matching tensors.
inline void momentum_update(const std::vector<Tensor*>& online,
                            const std::vector<Tensor*>& momentum, double coefficient) {
    if (!(coefficient >= 0.0 && coefficient < 1.0))
        throw ParameterError("momentum_update: coefficient must lie in [0, 1)");
    if (online.size() != momentum.size())
        throw ContractViolation("momentum_update: parameter list sizes differ");
    for (size_t i = 0; i < online.size(); ++i) {
        if (online[i]->value.rows() != momentum[i]->value.rows() ||
            online[i]->value.cols() != momentum[i]->value.cols())
            throw ContractViolation("momentum_update: tensor shape mismatch at index " +
                                    std::to_string(i));
        momentum[i]->value =
            coefficient * momentum[i]->value + (1.0 - coefficient) * online[i]->value;
    }
}

// Online cohort plus its EMA twin and one queue per peer.
struct MomentumCohort {
    Cohort online;
    Cohort momentum;  // structural copy, updated only by EMA
    double coefficient = 0.999;
    std::vector<NegativeQueue<double>> queues;

    static MomentumCohort build(CohortSpec spec, double coefficient, Eigen::Index queue_capacity) {
        if (!(coefficient >= 0.0 && coefficient < 1.0))
            throw ParameterError("MomentumCohort: coefficient must lie in [0, 1)");
        MomentumCohort mc;
        mc.online = Cohort::build(spec);
        mc.momentum = mc.online;  // deep copy, theta' starts equal to theta
        mc.coefficient = coefficient;
        for (int m = 0; m < mc.online.spec.M; ++m)
            mc.queues.emplace_back(queue_capacity, mc.online.spec.embed_dim);
        return mc;
    }

    void update_momentum() {
        momentum_update(online.all_params(), momentum.all_params(), coefficient);
    }
};

struct SelfsupStepResult {
    LossReport<double> report;
    bool skipped = false;  // queue warmup: nothing trained this step
};

// One MCL-MoCo step. Anchors come from the online encoders on view 1,
// positives from the momentum encoders on view 2, negatives from the peer
// queues (snapshot taken before this step's enqueue). ICL crosses online
// anchors with peer momentum pools. After backward and the optimizer step,
// momentum encoders are EMA-updated and the step's momentum embeddings are
// enqueued. Underfilled queues make the step a warmup: it only enqueues.
inline SelfsupStepResult selfsup_step(MomentumCohort& mc, const Matd& view1, const Matd& view2,
                                      const MCLWeights<double>& weights, SGD* opt) {
    const int M = mc.online.spec.M;
    const Eigen::Index B = view1.rows();
    if (view2.rows() != B) throw ContractViolation("selfsup_step: view batches differ in size");

    CohortForward fm = mc.momentum.forward_all(view2);  // no gradients ever flow here

    SelfsupStepResult out;
    const Eigen::Index K = mc.queues[0].capacity;
    bool ready = true;
    for (const auto& q : mc.queues) ready = ready && q.full();

    if (ready) {
        CohortForward fo = mc.online.forward_all(view1);
        std::vector<ContrastSet<double>> nets(static_cast<size_t>(M));
        for (int m = 0; m < M; ++m) {
            auto& s = nets[static_cast<size_t>(m)];
            s.network_id = m + 1;
            s.anchors = fo.embeddings[static_cast<size_t>(m)];
            s.pool.resize(B + K, mc.online.spec.embed_dim);
            s.pool.topRows(B) = fm.embeddings[static_cast<size_t>(m)];
            s.pool.bottomRows(K) = mc.queues[static_cast<size_t>(m)].rows;
        }
        std::vector<int> ids(static_cast<size_t>(B));
        for (Eigen::Index i = 0; i < B; ++i) ids[static_cast<size_t>(i)] = static_cast<int>(i);
        const auto tuples = two_view_tuples(ids, ids, static_cast<int>(K));

        MCLGradients<double> grads;
        out.report = mcl_loss(nets, tuples, weights, &grads);

        mc.online.zero_grads();
        std::vector<Matd> no_dlogits(static_cast<size_t>(M));
        mc.online.backward(fo, no_dlogits, grads.d_anchors);  // pool side is detached
        if (opt) opt->step();
        mc.update_momentum();
    } else {
        out.skipped = true;
    }

    for (int m = 0; m < M; ++m)
        mc.queues[static_cast<size_t>(m)].enqueue(fm.embeddings[static_cast<size_t>(m)]);
    return out;
}

}  // namespace mcl
