// MCL loss terms: VCL, ICL, their cohort sums, KL-based soft variants with
// stop-gradient targets, the combined MCL objective, the supervised total
// loss and the mutual-information lower bound. Every loss has an analytic
// gradient twin used by training and checked against finite differences.
#pragma once

#include <json.hpp>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mcl/embedding.hpp"
#include "mcl/types.hpp"

namespace mcl {

// ---------------------------------------------------------------------------
// Weights and reports
// ---------------------------------------------------------------------------

template <class Scalar>
struct MCLWeights {
    Scalar alpha = Scalar(0.1);    // VCL
    Scalar beta = Scalar(0.1);     // ICL
    Scalar gamma = Scalar(1);      // soft VCL
    Scalar lambda_ = Scalar(1);    // soft ICL
    Scalar tau_hard = Scalar(0.1);
    Scalar tau_soft = Scalar(0.3);  // default 3 x tau_hard

    static MCLWeights supervised_defaults(Scalar tau = Scalar(0.1)) {
        return MCLWeights{Scalar(0.1), Scalar(0.1), Scalar(1), Scalar(1), tau, Scalar(3) * tau};
    }
    static MCLWeights selfsup_defaults(Scalar tau = Scalar(0.1)) {
        return MCLWeights{Scalar(1), Scalar(1), Scalar(1), Scalar(1), tau, Scalar(3) * tau};
    }
    static MCLWeights zeros(Scalar tau = Scalar(0.1)) {
        return MCLWeights{Scalar(0), Scalar(0), Scalar(0), Scalar(0), tau, Scalar(3) * tau};
    }

    void validate() const {
        if (alpha < Scalar(0) || beta < Scalar(0) || gamma < Scalar(0) || lambda_ < Scalar(0))
            throw ParameterError("MCLWeights: weights must be >= 0");
        if (!(tau_hard > Scalar(0)) || !(tau_soft > Scalar(0)))
            throw ParameterError("MCLWeights: temperatures must be > 0");
    }
    bool all_zero() const {
        return alpha == Scalar(0) && beta == Scalar(0) && gamma == Scalar(0) && lambda_ == Scalar(0);
    }
};

template <class Scalar>
struct LossReport {
    Scalar total = Scalar(0);
    std::map<std::string, Scalar> per_term;   // unweighted: vcl, icl, soft_vcl, soft_icl, ce
    std::map<int, Scalar> per_network;        // weighted share attributed to each network
    std::map<std::string, Scalar> terms;      // fine-grained, e.g. "icl/1->2"
    MCLWeights<Scalar> weights;
    int num_networks = 0;

    Scalar term(const std::string& name) const {
        auto it = per_term.find(name);
        return it == per_term.end() ? Scalar(0) : it->second;
    }
    // Mean directed ICL loss, the expectation estimate consumed by Eq. 4.
    Scalar mean_icl_per_pair() const {
        const int pairs = num_networks * (num_networks - 1);
        return pairs > 0 ? term("icl") / Scalar(pairs) : Scalar(0);
    }
    Scalar weighted_sum_of_terms() const {
        return weights.alpha * term("vcl") + weights.beta * term("icl") +
               weights.gamma * term("soft_vcl") + weights.lambda_ * term("soft_icl") + term("ce");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["total"] = double(total);
        for (const char* k : {"vcl", "icl", "soft_vcl", "soft_icl", "ce"}) j[k] = double(term(k));
        nlohmann::json pn = nlohmann::json::object();
        for (const auto& [net, v] : per_network) pn[std::to_string(net)] = double(v);
        j["per_network"] = pn;
        nlohmann::json tj = nlohmann::json::object();
        for (const auto& [name, v] : terms) tj[name] = double(v);
        j["terms"] = tj;
        return j;
    }
};

// ---------------------------------------------------------------------------
// InfoNCE kernels (Eq. 1 / Eq. 3 share the same functional form)
// ---------------------------------------------------------------------------

// -log( exp(a.p/tau) / sum_k exp(a.c_k/tau) ), computed via log-sum-exp.
template <class Scalar>
Scalar info_nce(const Vec<Scalar>& anchor, const Vec<Scalar>& positive,
                const Mat<Scalar>& negatives, Scalar tau) {
    if (negatives.rows() < 1) throw ContractViolation("info_nce: K >= 1 negatives required");
    Mat<Scalar> contrast(negatives.rows() + 1, positive.size());
    contrast.row(0) = positive.transpose();
    contrast.bottomRows(negatives.rows()) = negatives;
    const Vec<Scalar> s = similarity_logits(anchor, contrast, tau);
    return -s(0) + log_sum_exp(s);
}

template <class Scalar>
struct InfoNCEGrad {
    Scalar loss;
    Vec<Scalar> d_anchor;
    Vec<Scalar> d_positive;
    Mat<Scalar> d_negatives;
};

template <class Scalar>
InfoNCEGrad<Scalar> info_nce_grad(const Vec<Scalar>& anchor, const Vec<Scalar>& positive,
                                  const Mat<Scalar>& negatives, Scalar tau) {
    if (negatives.rows() < 1) throw ContractViolation("info_nce: K >= 1 negatives required");
    const Eigen::Index K = negatives.rows();
    Mat<Scalar> contrast(K + 1, positive.size());
    contrast.row(0) = positive.transpose();
    contrast.bottomRows(K) = negatives;
    const Vec<Scalar> s = similarity_logits(anchor, contrast, tau);
    Vec<Scalar> g = softmax(s);  // dL/ds = p - e_0
    InfoNCEGrad<Scalar> out;
    out.loss = -s(0) + log_sum_exp(s);
    g(0) -= Scalar(1);
    out.d_anchor = contrast.transpose() * g / tau;
    Mat<Scalar> dc = g * anchor.transpose() / tau;  // (K+1) x d
    out.d_positive = dc.row(0).transpose();
    out.d_negatives = dc.bottomRows(K);
    return out;
}

// ---------------------------------------------------------------------------
// VCL / ICL spec surfaces
// ---------------------------------------------------------------------------

template <class Scalar>
Scalar vcl_loss(const Vec<Scalar>& anchor, const Vec<Scalar>& positive,
                const Mat<Scalar>& negatives, Scalar tau) {
    return info_nce(anchor, positive, negatives, tau);
}

// Network-tagged variant; VCL demands a single embedding space.
template <class Scalar>
Scalar vcl_loss(const Vec<Scalar>& anchor, const Vec<Scalar>& positive,
                const Mat<Scalar>& negatives, Scalar tau, int anchor_network,
                int contrast_network) {
    if (anchor_network != contrast_network)
        throw ContractViolation("vcl_loss: mixed network ids " + std::to_string(anchor_network) +
                                " and " + std::to_string(contrast_network));
    return info_nce(anchor, positive, negatives, tau);
}

// Anchor from network a, positive/negatives from network b != a.
template <class Scalar>
Scalar icl_loss(const Vec<Scalar>& anchor, const Vec<Scalar>& positive,
                const Mat<Scalar>& negatives, Scalar tau, int network_a, int network_b) {
    if (network_a == network_b)
        throw ContractViolation("icl_loss: requires distinct networks, got a == b == " +
                                std::to_string(network_a));
    return info_nce(anchor, positive, negatives, tau);
}

namespace detail {
template <class Scalar>
void gather_tuple(const EmbeddingBatch<Scalar>& batch, const ContrastiveTuple& t,
                  Vec<Scalar>& anchor, Vec<Scalar>& positive, Mat<Scalar>& negatives) {
    anchor = batch.vectors.row(t.anchor_id).transpose();
    positive = batch.vectors.row(t.positive_id).transpose();
    negatives.resize(t.K(), batch.dim());
    for (int k = 0; k < t.K(); ++k) negatives.row(k) = batch.vectors.row(t.negative_ids[k]);
}
}  // namespace detail

template <class Scalar>
Scalar vcl_loss(const EmbeddingBatch<Scalar>& batch, const ContrastiveTuple& t, Scalar tau) {
    Vec<Scalar> a, p;
    Mat<Scalar> n;
    detail::gather_tuple(batch, t, a, p, n);
    return info_nce(a, p, n, tau);
}

// Tuple realized across two aligned batches: anchor from `anchor_batch`,
// contrast rows from `contrast_batch`. Both must index the same samples.
template <class Scalar>
Scalar icl_loss(const EmbeddingBatch<Scalar>& anchor_batch,
                const EmbeddingBatch<Scalar>& contrast_batch, const ContrastiveTuple& t,
                Scalar tau) {
    if (anchor_batch.network_id == contrast_batch.network_id)
        throw ContractViolation("icl_loss: requires distinct networks");
    if (anchor_batch.sample_ids != contrast_batch.sample_ids)
        throw ContractViolation("icl_loss: anchor and contrast batches index different samples");
    Vec<Scalar> a = anchor_batch.vectors.row(t.anchor_id).transpose();
    Vec<Scalar> p = contrast_batch.vectors.row(t.positive_id).transpose();
    Mat<Scalar> n(t.K(), contrast_batch.dim());
    for (int k = 0; k < t.K(); ++k) n.row(k) = contrast_batch.vectors.row(t.negative_ids[k]);
    return info_nce(a, p, n, tau);
}

// ---------------------------------------------------------------------------
// Cohort sums (Eq. 2 and Eq. 5)
// ---------------------------------------------------------------------------

// One anchor tuple realized in one network's embedding space.
template <class Scalar>
struct TupleEmbeddings {
    Vec<Scalar> anchor;
    Vec<Scalar> positive;
    Mat<Scalar> negatives;
    int network_id = 0;
};

template <class Scalar>
Scalar vcl_cohort_loss(const std::vector<TupleEmbeddings<Scalar>>& per_network, Scalar tau) {
    if (per_network.empty()) throw ContractViolation("vcl_cohort_loss: M >= 1 required");
    Scalar total = Scalar(0);
    for (const auto& t : per_network) total += info_nce(t.anchor, t.positive, t.negatives, tau);
    return total;
}

// Sum over unordered pairs of both directions: M(M-1) directed terms.
template <class Scalar>
Scalar icl_cohort_loss(const std::vector<TupleEmbeddings<Scalar>>& per_network, Scalar tau) {
    const int M = static_cast<int>(per_network.size());
    if (M < 2) throw ContractViolation("icl_cohort_loss: M >= 2 required");
    Scalar total = Scalar(0);
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b) {
            if (a == b) continue;
            total += info_nce(per_network[a].anchor, per_network[b].positive,
                              per_network[b].negatives, tau);
        }
    return total;
}

// ---------------------------------------------------------------------------
// KL divergence with stop-gradient target (Eq. 6/7 operator)
// ---------------------------------------------------------------------------

namespace detail {
template <class Scalar>
Vec<Scalar> safe_log_probs(const ContrastiveDistribution<Scalar>& d) {
    if (d.logits.size() == d.probs.size()) return log_softmax(d.logits);
    return d.probs.array().max(Scalar(1e-12)).log();
}
}  // namespace detail

template <class Scalar>
Scalar kl_divergence(const ContrastiveDistribution<Scalar>& target,
                     const ContrastiveDistribution<Scalar>& pred) {
    if (target.size() != pred.size())
        throw ContractViolation("kl_divergence: length mismatch " + std::to_string(target.size()) +
                                " vs " + std::to_string(pred.size()));
    const Vec<Scalar> log_t = target.probs.array().max(Scalar(1e-12)).log();
    const Vec<Scalar> log_p = detail::safe_log_probs(pred);
    return (target.probs.array() * (log_t - log_p).array()).sum();
}

template <class Scalar>
struct KLGrad {
    Scalar value;
    Vec<Scalar> d_pred_logits;    // p - t
    Vec<Scalar> d_target_logits;  // exactly zero: target is detached
};

template <class Scalar>
KLGrad<Scalar> kl_divergence_grad(const ContrastiveDistribution<Scalar>& target,
                                  const ContrastiveDistribution<Scalar>& pred) {
    KLGrad<Scalar> out;
    out.value = kl_divergence(target, pred);
    out.d_pred_logits = pred.probs - target.probs;
    out.d_target_logits = Vec<Scalar>::Zero(target.size());
    return out;
}

// ---------------------------------------------------------------------------
// Soft losses over distributions (Eq. 6 and Eq. 7)
// ---------------------------------------------------------------------------

template <class Scalar>
Scalar soft_vcl_loss(const std::vector<ContrastiveDistribution<Scalar>>& p) {
    const int M = static_cast<int>(p.size());
    if (M < 2) throw ContractViolation("soft_vcl_loss: M >= 2 required");
    for (int m = 1; m < M; ++m)
        if (p[m].temperature != p[0].temperature)
            throw ContractViolation("soft_vcl_loss: all distributions must share tau_soft");
    Scalar total = Scalar(0);
    for (int m = 0; m < M; ++m)
        for (int l = 0; l < M; ++l) {
            if (l == m) continue;
            total += kl_divergence(p[l], p[m]);  // p_l is the detached soft label
        }
    return total;
}

// q[a][b] holds q_{a->b}; diagonal entries are ignored.
template <class Scalar>
Scalar soft_icl_loss(const std::vector<std::vector<ContrastiveDistribution<Scalar>>>& q) {
    const int M = static_cast<int>(q.size());
    if (M < 2) throw ContractViolation("soft_icl_loss: M >= 2 required");
    for (const auto& row : q)
        if (static_cast<int>(row.size()) != M)
            throw ContractViolation("soft_icl_loss: q must be an MxM grid");
    Scalar total = Scalar(0);
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b) {
            if (a == b) continue;
            total += kl_divergence(q[b][a], q[a][b]);  // q_{b->a} detached
        }
    return total;
}

// Single directed soft term KL(target || pred) built from embeddings at
// tau_soft. Target-side gradients are exactly zero by construction and are
// returned explicitly so stop-gradient can be audited.
template <class Scalar>
struct SoftTermGrad {
    Scalar value;
    Vec<Scalar> d_pred_anchor;
    Vec<Scalar> d_pred_positive;
    Mat<Scalar> d_pred_negatives;
    Vec<Scalar> d_target_anchor;
    Vec<Scalar> d_target_positive;
    Mat<Scalar> d_target_negatives;
};

template <class Scalar>
SoftTermGrad<Scalar> soft_kl_term_grad(const TupleEmbeddings<Scalar>& target,
                                       const TupleEmbeddings<Scalar>& pred, Scalar tau_soft) {
    const Eigen::Index K = pred.negatives.rows();
    auto stack = [](const TupleEmbeddings<Scalar>& t) {
        Mat<Scalar> c(t.negatives.rows() + 1, t.positive.size());
        c.row(0) = t.positive.transpose();
        c.bottomRows(t.negatives.rows()) = t.negatives;
        return c;
    };
    const Mat<Scalar> ct = stack(target);
    const Mat<Scalar> cp = stack(pred);
    const auto dt = contrastive_distribution(target.anchor, ct, tau_soft);
    const auto dp = contrastive_distribution(pred.anchor, cp, tau_soft);
    const KLGrad<Scalar> kg = kl_divergence_grad(dt, dp);

    SoftTermGrad<Scalar> out;
    out.value = kg.value;
    const Vec<Scalar>& g = kg.d_pred_logits;
    out.d_pred_anchor = cp.transpose() * g / tau_soft;
    Mat<Scalar> dc = g * pred.anchor.transpose() / tau_soft;
    out.d_pred_positive = dc.row(0).transpose();
    out.d_pred_negatives = dc.bottomRows(K);
    out.d_target_anchor = Vec<Scalar>::Zero(target.anchor.size());
    out.d_target_positive = Vec<Scalar>::Zero(target.positive.size());
    out.d_target_negatives = Mat<Scalar>::Zero(target.negatives.rows(), target.negatives.cols());
    return out;
}

// ---------------------------------------------------------------------------
// Combined MCL objective (Eq. 9) over a batch of tuples
// ---------------------------------------------------------------------------

// One network's view of the step: anchors and the pool its candidates are
// gathered from. Candidate row j must refer to the same underlying sample in
// every network's pool, and anchor row i to the same sample in every
// network's anchors.
template <class Scalar>
struct ContrastSet {
    Mat<Scalar> anchors;  // n x d
    Mat<Scalar> pool;     // P x d
    int network_id = 0;   // 1-based; 0 means "use position + 1"
};

template <class Scalar>
struct MCLGradients {
    std::vector<Mat<Scalar>> d_anchors;
    std::vector<Mat<Scalar>> d_pools;
};

// Every loss term is a mean over tuples; hard losses use tau_hard and flow
// into both anchors and pools, soft losses use tau_soft and flow into the
// pred side only.
template <class Scalar>
LossReport<Scalar> mcl_loss(const std::vector<ContrastSet<Scalar>>& nets,
                            const std::vector<ContrastiveTuple>& tuples,
                            const MCLWeights<Scalar>& weights,
                            MCLGradients<Scalar>* grads = nullptr) {
    weights.validate();
    const int M = static_cast<int>(nets.size());
    if (M < 2) throw ContractViolation("mcl_loss: M >= 2 required");
    if (tuples.empty()) throw ContractViolation("mcl_loss: no tuples");
    const Eigen::Index d = nets[0].anchors.cols();
    const Eigen::Index n_anchors = nets[0].anchors.rows();
    const Eigen::Index P = nets[0].pool.rows();
    for (const auto& s : nets) {
        if (s.anchors.cols() != d || s.pool.cols() != d)
            throw ContractViolation("mcl_loss: embedding dims differ across networks");
        if (s.anchors.rows() != n_anchors || s.pool.rows() != P)
            throw ContractViolation("mcl_loss: anchor/pool counts differ across networks");
    }

    LossReport<Scalar> report;
    report.weights = weights;
    report.num_networks = M;
    auto net_id = [&](int m) { return nets[m].network_id != 0 ? nets[m].network_id : m + 1; };

    if (grads) {
        grads->d_anchors.assign(M, Mat<Scalar>::Zero(n_anchors, d));
        grads->d_pools.assign(M, Mat<Scalar>::Zero(P, d));
    }
    if (weights.all_zero()) {
        for (const char* k : {"vcl", "icl", "soft_vcl", "soft_icl"}) report.per_term[k] = Scalar(0);
        report.total = Scalar(0);
        return report;
    }

    const bool need_hard = weights.alpha > Scalar(0) || weights.beta > Scalar(0);
    const bool need_soft = weights.gamma > Scalar(0) || weights.lambda_ > Scalar(0);
    const Scalar inv_n = Scalar(1) / Scalar(tuples.size());

    // term accumulators
    std::vector<Scalar> vcl_m(M, Scalar(0));
    Mat<Scalar> icl_ab = Mat<Scalar>::Zero(M, M);
    Mat<Scalar> svcl_lm = Mat<Scalar>::Zero(M, M);  // KL(p_l || p_m)
    Mat<Scalar> sicl_ab = Mat<Scalar>::Zero(M, M);  // KL(q_{b->a} || q_{a->b}) indexed [a][b]

    const bool need_diag = weights.alpha > Scalar(0) || weights.gamma > Scalar(0);
    const bool need_cross = weights.beta > Scalar(0) || weights.lambda_ > Scalar(0);

    std::vector<int> cand;
    std::vector<Mat<Scalar>> cand_by_net(M);

    for (const auto& t : tuples) {
        const int Kp1 = t.K() + 1;
        if (t.K() < 1) throw ContractViolation("mcl_loss: tuples need K >= 1 negatives");
        cand.clear();
        cand.push_back(t.positive_id);
        cand.insert(cand.end(), t.negative_ids.begin(), t.negative_ids.end());
        if (t.anchor_id < 0 || t.anchor_id >= n_anchors)
            throw ContractViolation("mcl_loss: anchor id out of range");
        for (int c : cand)
            if (c < 0 || c >= P) throw ContractViolation("mcl_loss: pool id out of range");

        for (int b = 0; b < M; ++b) {
            cand_by_net[b].resize(Kp1, d);
            for (int k = 0; k < Kp1; ++k) cand_by_net[b].row(k) = nets[b].pool.row(cand[k]);
        }

        // dots_ab = candidates_b . anchor_a, shared by hard and soft paths
        std::vector<std::vector<Vec<Scalar>>> dot(M, std::vector<Vec<Scalar>>(M));
        std::vector<std::vector<Vec<Scalar>>> p_soft(M, std::vector<Vec<Scalar>>(M));
        std::vector<std::vector<Vec<Scalar>>> logp_soft(M, std::vector<Vec<Scalar>>(M));
        for (int a = 0; a < M; ++a) {
            const Vec<Scalar> anchor = nets[a].anchors.row(t.anchor_id).transpose();
            for (int b = 0; b < M; ++b) {
                if (a == b ? !need_diag : !need_cross) continue;
                dot[a][b] = cand_by_net[b] * anchor;
                if (need_soft) {
                    Vec<Scalar> ls = log_softmax((dot[a][b] / weights.tau_soft).eval());
                    logp_soft[a][b] = ls;
                    p_soft[a][b] = ls.array().exp();
                }
            }
        }

        // accumulated dL/d(dot_ab) for this tuple
        std::vector<std::vector<Vec<Scalar>>> gdot(M, std::vector<Vec<Scalar>>(M));
        const bool want_grads = grads != nullptr;
        if (want_grads)
            for (int a = 0; a < M; ++a)
                for (int b = 0; b < M; ++b) gdot[a][b] = Vec<Scalar>::Zero(Kp1);

        if (need_hard) {
            for (int a = 0; a < M; ++a)
                for (int b = 0; b < M; ++b) {
                    const Scalar w = (a == b) ? weights.alpha : weights.beta;
                    const bool track = (a == b) ? weights.alpha > Scalar(0) : weights.beta > Scalar(0);
                    if (!track) continue;
                    Vec<Scalar> s = dot[a][b] / weights.tau_hard;
                    const Scalar loss = -s(0) + log_sum_exp(s);
                    if (a == b)
                        vcl_m[a] += loss * inv_n;
                    else
                        icl_ab(a, b) += loss * inv_n;
                    if (want_grads && w > Scalar(0)) {
                        Vec<Scalar> g = softmax(s);
                        g(0) -= Scalar(1);
                        gdot[a][b] += g * (w * inv_n / weights.tau_hard);
                    }
                }
        }

        if (need_soft) {
            for (int m = 0; m < M; ++m)
                for (int l = 0; l < M; ++l) {
                    if (l == m) continue;
                    // soft VCL: KL(p_l || p_m), gradient into network m only
                    if (weights.gamma > Scalar(0)) {
                        const Vec<Scalar>& tgt = p_soft[l][l];
                        const Vec<Scalar> log_t = tgt.array().max(Scalar(1e-12)).log();
                        const Scalar v =
                            (tgt.array() * (log_t - logp_soft[m][m]).array()).sum();
                        svcl_lm(l, m) += v * inv_n;
                        if (want_grads)
                            gdot[m][m] +=
                                (p_soft[m][m] - tgt) * (weights.gamma * inv_n / weights.tau_soft);
                    }
                }
            for (int a = 0; a < M; ++a)
                for (int b = 0; b < M; ++b) {
                    if (a == b) continue;
                    // soft ICL: KL(q_{b->a} || q_{a->b}), gradient into pred q_{a->b}
                    if (weights.lambda_ > Scalar(0)) {
                        const Vec<Scalar>& tgt = p_soft[b][a];
                        const Vec<Scalar> log_t = tgt.array().max(Scalar(1e-12)).log();
                        const Scalar v = (tgt.array() * (log_t - logp_soft[a][b]).array()).sum();
                        sicl_ab(a, b) += v * inv_n;
                        if (want_grads)
                            gdot[a][b] +=
                                (p_soft[a][b] - tgt) * (weights.lambda_ * inv_n / weights.tau_soft);
                    }
                }
        }

        if (want_grads) {
            for (int a = 0; a < M; ++a) {
                const Vec<Scalar> anchor = nets[a].anchors.row(t.anchor_id).transpose();
                for (int b = 0; b < M; ++b) {
                    const Vec<Scalar>& g = gdot[a][b];
                    if (g.isZero(Scalar(0))) continue;
                    grads->d_anchors[a].row(t.anchor_id) += (cand_by_net[b].transpose() * g).transpose();
                    for (int k = 0; k < Kp1; ++k)
                        grads->d_pools[b].row(cand[k]) += g(k) * anchor.transpose();
                }
            }
        }
    }

    // assemble report
    Scalar vcl = Scalar(0), icl = Scalar(0), svcl = Scalar(0), sicl = Scalar(0);
    for (int m = 0; m < M; ++m) {
        vcl += vcl_m[m];
        if (weights.alpha > Scalar(0))
            report.terms["vcl/" + std::to_string(net_id(m))] = vcl_m[m];
    }
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b) {
            if (a == b) continue;
            icl += icl_ab(a, b);
            svcl += svcl_lm(a, b);
            sicl += sicl_ab(a, b);
            const std::string ab = std::to_string(net_id(a)) + "->" + std::to_string(net_id(b));
            if (weights.beta > Scalar(0)) report.terms["icl/" + ab] = icl_ab(a, b);
            if (weights.gamma > Scalar(0))
                report.terms["soft_vcl/" + ab] = svcl_lm(a, b);  // KL(p_a || p_b)
            if (weights.lambda_ > Scalar(0)) report.terms["soft_icl/" + ab] = sicl_ab(a, b);
        }
    report.per_term["vcl"] = vcl;
    report.per_term["icl"] = icl;
    report.per_term["soft_vcl"] = svcl;
    report.per_term["soft_icl"] = sicl;
    report.total = weights.alpha * vcl + weights.beta * icl + weights.gamma * svcl +
                   weights.lambda_ * sicl;
    for (int m = 0; m < M; ++m) {
        Scalar share = weights.alpha * vcl_m[m];
        for (int b = 0; b < M; ++b) {
            if (b == m) continue;
            share += weights.beta * icl_ab(m, b);       // anchor side of ICL
            share += weights.gamma * svcl_lm(b, m);     // pred side of soft VCL
            share += weights.lambda_ * sicl_ab(m, b);   // pred side of soft ICL
        }
        report.per_network[net_id(m)] = share;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Cross-entropy and the supervised total loss (Eq. 10)
// ---------------------------------------------------------------------------

// Mean CE over rows. Optional gradient (softmax - onehot)/n.
template <class Scalar>
Scalar cross_entropy(const Mat<Scalar>& logits, const std::vector<int>& labels,
                     Mat<Scalar>* dlogits = nullptr) {
    const Eigen::Index n = logits.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw DataError("cross_entropy: label count mismatch");
    Scalar total = Scalar(0);
    if (dlogits) dlogits->resize(n, logits.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= logits.cols())
            throw DataError("cross_entropy: label " + std::to_string(y) + " out of range at row " +
                            std::to_string(i));
        const Vec<Scalar> ls = log_softmax(logits.row(i).transpose().eval());
        total -= ls(y);
        if (dlogits) {
            Vec<Scalar> g = ls.array().exp();
            g(y) -= Scalar(1);
            dlogits->row(i) = g.transpose() / Scalar(n);
        }
    }
    return total / Scalar(n);
}

// sum_m CE(softmax(z_m), y) + mcl.total. Optional per-network logit grads and
// a combined report with the ce term filled in.
template <class Scalar>
Scalar supervised_total_loss(const std::vector<Mat<Scalar>>& logits, const std::vector<int>& labels,
                             const LossReport<Scalar>& mcl,
                             std::vector<Mat<Scalar>>* dlogits = nullptr,
                             LossReport<Scalar>* combined = nullptr) {
    if (logits.empty()) throw ContractViolation("supervised_total_loss: no networks");
    Scalar ce_sum = Scalar(0);
    if (dlogits) dlogits->resize(logits.size());
    LossReport<Scalar> rep = mcl;
    for (size_t m = 0; m < logits.size(); ++m) {
        Mat<Scalar>* g = dlogits ? &(*dlogits)[m] : nullptr;
        const Scalar ce = cross_entropy(logits[m], labels, g);
        ce_sum += ce;
        rep.terms["ce/" + std::to_string(m + 1)] = ce;
        rep.per_network[static_cast<int>(m + 1)] += ce;
    }
    rep.per_term["ce"] = ce_sum;
    rep.total = mcl.total + ce_sum;
    if (combined) *combined = rep;
    return rep.total;
}

// ---------------------------------------------------------------------------
// Mutual-information lower bound (Eq. 4)
// ---------------------------------------------------------------------------

// log(K) - E[L^ICL]; deliberately unclamped (negative when loss > log K).
template <class Scalar>
Scalar mi_lower_bound(int K, Scalar mean_icl_loss) {
    if (K < 1) throw ParameterError("mi_lower_bound: K >= 1 required");
    return std::log(Scalar(K)) - mean_icl_loss;
}

}  // namespace mcl
