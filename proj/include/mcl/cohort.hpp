// The M-network training graph: backbones with classifier heads and
// projection modules, optional shared low-level trunk (forced for M>2), and
// extraction of a projection-free deployment network.
#pragma once

#include <json.hpp>

#include <set>
#include <string>
#include <vector>

#include "mcl/embedding.hpp"
#include "mcl/io.hpp"
#include "mcl/network.hpp"

namespace mcl {

struct CohortSpec {
    int M = 2;
    std::string backbone = "mlp:in=16,hidden=64";
    int embed_dim = 128;
    bool share_trunk = false;  // forced true when M > 2
    int trunk_split = -1;      // -1: architecture default (the stem)
    std::vector<uint64_t> init_seeds;
    int num_classes = 10;

    void validate() {
        if (M < 2) throw ParameterError("cohort spec: M >= 2 required, got " + std::to_string(M));
        if (embed_dim < 1) throw ParameterError("cohort spec: embed_dim >= 1");
        if (num_classes < 2) throw ParameterError("cohort spec: num_classes >= 2");
        if (init_seeds.empty()) {
            init_seeds.resize(static_cast<size_t>(M));
            for (int m = 0; m < M; ++m) init_seeds[static_cast<size_t>(m)] = 1000 + 7919u * m;
        }
        if (static_cast<int>(init_seeds.size()) != M)
            throw ParameterError("cohort spec: need one init seed per network");
        std::set<uint64_t> uniq(init_seeds.begin(), init_seeds.end());
        if (static_cast<int>(uniq.size()) != M)
            throw ParameterError("cohort spec: init seeds must be pairwise distinct");
        if (M > 2) share_trunk = true;
    }

    nlohmann::json to_json() const {
        return {{"M", M},          {"backbone", backbone},       {"embed_dim", embed_dim},
                {"share_trunk", share_trunk}, {"trunk_split", trunk_split},
                {"init_seeds", init_seeds},   {"num_classes", num_classes}};
    }
    static CohortSpec from_json(const nlohmann::json& j) {
        CohortSpec s;
        s.M = j.at("M");
        s.backbone = j.at("backbone");
        s.embed_dim = j.at("embed_dim");
        s.share_trunk = j.at("share_trunk");
        s.trunk_split = j.at("trunk_split");
        s.init_seeds = j.at("init_seeds").get<std::vector<uint64_t>>();
        s.num_classes = j.at("num_classes");
        return s;
    }
};

struct CohortForward {
    Matd trunk_out;
    std::vector<Matd> features;    // [n x F]
    std::vector<Matd> logits;      // [n x C]
    std::vector<Matd> pre_embed;   // [n x d] pre-normalization
    std::vector<Matd> embeddings;  // [n x d] unit rows
};

// Reference single network (backbone + classifier) for parameter parity.
inline Network build_single_network(const std::string& backbone, int num_classes, uint64_t seed) {
    Rng rng(seed);
    BackboneBuild b = build_backbone(backbone, rng);
    Network net = std::move(b.net);
    net.add(std::make_unique<DenseLayer>(b.feature_dim, num_classes, rng));
    return net;
}

class Cohort {
public:
    CohortSpec spec;
    Network trunk;  // empty unless share_trunk
    std::vector<Network> branches;
    std::vector<Network> classifiers;  // one dense each
    std::vector<Network> proj_heads;
    int feature_dim = 0;
    int input_dim = 0;
    int trunk_split_used = 0;

    static Cohort build(CohortSpec s) {
        s.validate();
        Cohort c;
        c.spec = s;
        for (int m = 0; m < s.M; ++m) {
            Rng rng(s.init_seeds[static_cast<size_t>(m)]);
            BackboneBuild bb = build_backbone(s.backbone, rng);
            c.feature_dim = bb.feature_dim;
            c.input_dim = bb.input_dim;
            const int split = s.trunk_split >= 0 ? s.trunk_split : bb.default_trunk_split;
            if (split < 0 || split > static_cast<int>(bb.net.size()))
                throw ParameterError("cohort: trunk_split out of range");
            c.trunk_split_used = s.share_trunk ? split : 0;
            if (s.share_trunk) {
                Network tail = bb.net.split_tail(static_cast<size_t>(split));
                if (m == 0) c.trunk = std::move(bb.net);  // trunk params from seed 0
                c.branches.push_back(std::move(tail));
            } else {
                c.branches.push_back(std::move(bb.net));
            }
            Network cls;
            cls.add(std::make_unique<DenseLayer>(bb.feature_dim, s.num_classes, rng));
            c.classifiers.push_back(std::move(cls));
            c.proj_heads.push_back(build_projection_head(bb.feature_dim, s.embed_dim, rng));
        }
        return c;
    }

    CohortForward forward_all(const Matd& x) {
        if (x.cols() != input_dim)
            throw DataError("forward_all: batch has " + std::to_string(x.cols()) +
                            " columns, backbone expects " + std::to_string(input_dim));
        CohortForward f;
        f.trunk_out = trunk.empty() ? x : trunk.forward(x);
        for (int m = 0; m < spec.M; ++m) {
            Matd feat = branches[static_cast<size_t>(m)].forward(f.trunk_out);
            f.logits.push_back(classifiers[static_cast<size_t>(m)].forward(feat));
            Matd u = proj_heads[static_cast<size_t>(m)].forward(feat);
            f.embeddings.push_back(l2_normalize(u));
            f.pre_embed.push_back(std::move(u));
            f.features.push_back(std::move(feat));
        }
        return f;
    }

    // dlogits and d_embeddings are gradients w.r.t. the matching forward_all
    // outputs (embeddings in normalized space). Must follow that forward call
    // so layer caches are fresh. Empty matrices mean "no gradient".
    void backward(const CohortForward& f, const std::vector<Matd>& dlogits,
                  const std::vector<Matd>& d_embeddings) {
        Matd d_trunk = Matd();
        for (int m = 0; m < spec.M; ++m) {
            const auto mm = static_cast<size_t>(m);
            Matd d_feat = Matd::Zero(f.features[mm].rows(), f.features[mm].cols());
            if (m < static_cast<int>(dlogits.size()) && dlogits[mm].size() > 0)
                d_feat += classifiers[mm].backward(dlogits[mm]);
            if (m < static_cast<int>(d_embeddings.size()) && d_embeddings[mm].size() > 0) {
                Matd du = l2_normalize_backward(f.pre_embed[mm], f.embeddings[mm], d_embeddings[mm]);
                d_feat += proj_heads[mm].backward(du);
            }
            Matd d_in = branches[mm].backward(d_feat);
            if (!trunk.empty()) {
                if (d_trunk.size() == 0)
                    d_trunk = std::move(d_in);
                else
                    d_trunk += d_in;
            }
        }
        if (!trunk.empty()) trunk.backward(d_trunk);
    }

    // Branch m (1-based) with trunk copy and classifier, projection dropped.
    Network extract_deployment_network(int m) const {
        if (m < 1 || m > spec.M)
            throw ParameterError("extract_deployment_network: index " + std::to_string(m) +
                                 " out of range 1.." + std::to_string(spec.M));
        Network net = trunk;  // deep copy (empty when not shared)
        Network branch = branches[static_cast<size_t>(m - 1)];
        net.append(std::move(branch));
        Network cls = classifiers[static_cast<size_t>(m - 1)];
        net.append(std::move(cls));
        return net;
    }

    std::vector<Tensor*> all_params() {
        std::vector<Tensor*> out;
        for (auto* t : trunk.params()) out.push_back(t);
        for (auto& n : branches)
            for (auto* t : n.params()) out.push_back(t);
        for (auto& n : classifiers)
            for (auto* t : n.params()) out.push_back(t);
        for (auto& n : proj_heads)
            for (auto* t : n.params()) out.push_back(t);
        return out;
    }
    void zero_grads() {
        for (auto* t : all_params()) t->zero_grad();
    }

    nlohmann::json describe() const {
        return {{"backbone", spec.backbone}, {"M", spec.M},
                {"share_trunk", spec.share_trunk}, {"trunk_split", trunk_split_used},
                {"feature_dim", feature_dim}, {"embed_dim", spec.embed_dim}};
    }
};

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace detail {
inline void collect_named(Network& net, const std::string& prefix,
                          std::vector<std::pair<std::string, const Matd*>>& out) {
    auto ps = net.params();
    for (size_t i = 0; i < ps.size(); ++i)
        out.emplace_back(prefix + "/p" + std::to_string(i), &ps[i]->value);
}
inline void restore_named(Network& net, const std::string& prefix, const Archive& a) {
    auto ps = net.params();
    for (size_t i = 0; i < ps.size(); ++i) {
        const std::string key = prefix + "/p" + std::to_string(i);
        auto it = a.tensors.find(key);
        if (it == a.tensors.end()) throw IoError("checkpoint: missing tensor " + key);
        if (it->second.rows() != ps[i]->value.rows() || it->second.cols() != ps[i]->value.cols())
            throw IoError("checkpoint: shape mismatch for " + key);
        ps[i]->value = it->second;
    }
}
}  // namespace detail

inline void cohort_tensor_table(Cohort& c,
                                std::vector<std::pair<std::string, const Matd*>>& table) {
    detail::collect_named(c.trunk, "trunk", table);
    for (int m = 0; m < c.spec.M; ++m) {
        const std::string id = std::to_string(m + 1);
        detail::collect_named(c.branches[static_cast<size_t>(m)], "branch" + id, table);
        detail::collect_named(c.classifiers[static_cast<size_t>(m)], "cls" + id, table);
        detail::collect_named(c.proj_heads[static_cast<size_t>(m)], "proj" + id, table);
    }
}

inline void save_cohort(const std::string& path, Cohort& c, nlohmann::json extra_meta = {},
                        std::vector<std::pair<std::string, const Matd*>> extra_tensors = {}) {
    nlohmann::json meta;
    meta["type"] = "cohort";
    meta["spec"] = c.spec.to_json();
    if (!extra_meta.is_null()) meta["extra"] = extra_meta;
    std::vector<std::pair<std::string, const Matd*>> table;
    cohort_tensor_table(c, table);
    for (auto& e : extra_tensors) table.push_back(e);
    save_archive(path, meta, table);
}

inline Cohort load_cohort(const std::string& path, Archive* archive_out = nullptr) {
    Archive a = load_archive(path);
    if (a.meta.at("type") != "cohort") throw IoError("load_cohort: archive is not a cohort");
    Cohort c = Cohort::build(CohortSpec::from_json(a.meta.at("spec")));
    detail::restore_named(c.trunk, "trunk", a);
    for (int m = 0; m < c.spec.M; ++m) {
        const std::string id = std::to_string(m + 1);
        detail::restore_named(c.branches[static_cast<size_t>(m)], "branch" + id, a);
        detail::restore_named(c.classifiers[static_cast<size_t>(m)], "cls" + id, a);
        detail::restore_named(c.proj_heads[static_cast<size_t>(m)], "proj" + id, a);
    }
    if (archive_out) *archive_out = std::move(a);
    return c;
}

// Standalone single-network checkpoint produced by deployment export.
inline void save_deployment(const std::string& path, Network& net, const std::string& backbone,
                            int num_classes, int branch_index) {
    nlohmann::json meta;
    meta["type"] = "deployment";
    meta["backbone"] = backbone;
    meta["num_classes"] = num_classes;
    meta["branch_index"] = branch_index;
    std::vector<std::pair<std::string, const Matd*>> table;
    detail::collect_named(net, "net", table);
    save_archive(path, meta, table);
}

inline Network load_deployment(const std::string& path, nlohmann::json* meta_out = nullptr) {
    Archive a = load_archive(path);
    if (a.meta.at("type") != "deployment")
        throw IoError("load_deployment: archive is not a deployment export");
    Network net = build_single_network(a.meta.at("backbone"), a.meta.at("num_classes"), 0);
    detail::restore_named(net, "net", a);
    if (meta_out) *meta_out = a.meta;
    return net;
}

}  // namespace mcl
