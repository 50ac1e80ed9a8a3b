// Layer stacks and backbone builders. Architectures are described by compact
// strings, e.g. "mlp:in=16,hidden=64", "small_cnn:c=8,in=3x32x32".
#pragma once

#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mcl/layers.hpp"

namespace mcl {

class Network {
public:
    Network() = default;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;
    Network(const Network& o) { *this = o; }
    Network& operator=(const Network& o) {
        layers_.clear();
        for (const auto& l : o.layers_) layers_.push_back(l->clone());
        return *this;
    }

    void add(std::unique_ptr<Layer> l) { layers_.push_back(std::move(l)); }
    size_t size() const { return layers_.size(); }
    bool empty() const { return layers_.empty(); }
    Layer& layer(size_t i) { return *layers_[i]; }
    const Layer& layer(size_t i) const { return *layers_[i]; }

    Matd forward(const Matd& x) {
        Matd h = x;
        for (auto& l : layers_) h = l->forward(h);
        return h;
    }
    // Forward through the first n layers only (n = size()-1 gives features
    // when the classifier is the last layer).
    Matd forward_prefix(const Matd& x, size_t n) {
        Matd h = x;
        for (size_t i = 0; i < n && i < layers_.size(); ++i) h = layers_[i]->forward(h);
        return h;
    }
    Matd backward(const Matd& dy) {
        Matd g = dy;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
        return g;
    }

    std::vector<Tensor*> params() {
        std::vector<Tensor*> out;
        for (auto& l : layers_)
            for (auto* t : l->params()) out.push_back(t);
        return out;
    }
    size_t param_count() {
        size_t n = 0;
        for (auto* t : params()) n += static_cast<size_t>(t->size());
        return n;
    }
    void zero_grads() {
        for (auto* t : params()) t->zero_grad();
    }
    // Splits off the trailing layers starting at `from`, leaving [0, from).
    Network split_tail(size_t from) {
        Network tail;
        for (size_t i = from; i < layers_.size(); ++i) tail.layers_.push_back(std::move(layers_[i]));
        layers_.resize(from);
        return tail;
    }
    void append(Network&& other) {
        for (auto& l : other.layers_) layers_.push_back(std::move(l));
        other.layers_.clear();
    }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// ---------------------------------------------------------------------------
// Architecture descriptors
// ---------------------------------------------------------------------------

struct ArchDescriptor {
    std::string name;
    std::map<std::string, std::string> kv;

    static ArchDescriptor parse(const std::string& s) {
        ArchDescriptor d;
        const auto colon = s.find(':');
        d.name = s.substr(0, colon);
        if (colon != std::string::npos) {
            std::stringstream ss(s.substr(colon + 1));
            std::string item;
            while (std::getline(ss, item, ',')) {
                const auto eq = item.find('=');
                if (eq == std::string::npos)
                    throw ParameterError("arch descriptor: expected key=value, got '" + item + "'");
                d.kv[item.substr(0, eq)] = item.substr(eq + 1);
            }
        }
        return d;
    }
    int get_int(const std::string& key, int fallback) const {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : std::stoi(it->second);
    }
    // "3x32x32" -> (c, h, w)
    void get_chw(int& c, int& h, int& w, const std::string& fallback) const {
        auto it = kv.find("in");
        std::string v = it == kv.end() ? fallback : it->second;
        if (sscanf(v.c_str(), "%dx%dx%d", &c, &h, &w) != 3)
            throw ParameterError("arch descriptor: bad in= shape '" + v + "'");
    }
};

struct BackboneBuild {
    Network net;
    int feature_dim = 0;
    int input_dim = 0;
    int default_trunk_split = 0;  // leading layers forming the stem
    std::string summary;
};

inline BackboneBuild build_backbone(const std::string& descriptor, Rng& rng) {
    const ArchDescriptor d = ArchDescriptor::parse(descriptor);
    BackboneBuild out;
    if (d.name == "mlp") {
        const int in = d.get_int("in", 16);
        const int hidden = d.get_int("hidden", 64);
        const int depth = d.get_int("depth", 2);
        if (depth < 1) throw ParameterError("mlp: depth >= 1");
        out.net.add(std::make_unique<DenseLayer>(in, hidden, rng, 0.01));
        out.net.add(std::make_unique<ReLULayer>());
        for (int i = 1; i < depth; ++i) {
            out.net.add(std::make_unique<DenseLayer>(hidden, hidden, rng, 0.01));
            out.net.add(std::make_unique<ReLULayer>());
        }
        out.feature_dim = hidden;
        out.input_dim = in;
        out.default_trunk_split = 2;
        out.summary = "mlp(in=" + std::to_string(in) + ", hidden=" + std::to_string(hidden) +
                      ", depth=" + std::to_string(depth) + ")";
    } else if (d.name == "small_cnn") {
        int c, h, w;
        d.get_chw(c, h, w, "3x32x32");
        const int base = d.get_int("c", 8);
        auto conv1 = std::make_unique<Conv2dLayer>(c, h, w, base, 3, 1, 1, rng);
        int ch = base, hh = conv1->out_h(), ww = conv1->out_w();
        out.net.add(std::move(conv1));
        out.net.add(std::make_unique<ReLULayer>());
        for (int blk = 0; blk < 2; ++blk) {
            auto conv = std::make_unique<Conv2dLayer>(ch, hh, ww, ch * 2, 3, 2, 1, rng);
            ch *= 2;
            hh = conv->out_h();
            ww = conv->out_w();
            out.net.add(std::move(conv));
            out.net.add(std::make_unique<ReLULayer>());
        }
        out.net.add(std::make_unique<GlobalAvgPoolLayer>(ch, hh, ww));
        out.feature_dim = ch;
        out.input_dim = c * h * w;
        out.default_trunk_split = 2;
        out.summary = "small_cnn(c=" + std::to_string(base) + ", in=" + std::to_string(c) + "x" +
                      std::to_string(h) + "x" + std::to_string(w) + ")";
    } else if (d.name == "tiny_resnet") {
        int c, h, w;
        d.get_chw(c, h, w, "3x32x32");
        const int base = d.get_int("c", 8);
        auto stem = std::make_unique<Conv2dLayer>(c, h, w, base, 3, 1, 1, rng);
        int ch = base, hh = stem->out_h(), ww = stem->out_w();
        out.net.add(std::move(stem));
        out.net.add(std::make_unique<ReLULayer>());
        for (int blk = 0; blk < 2; ++blk) {
            auto rb = std::make_unique<ResidualBlockLayer>(ch, hh, ww, ch * 2, 2, rng);
            ch = rb->out_channels();
            hh = rb->out_h();
            ww = rb->out_w();
            out.net.add(std::move(rb));
        }
        out.net.add(std::make_unique<GlobalAvgPoolLayer>(ch, hh, ww));
        out.feature_dim = ch;
        out.input_dim = c * h * w;
        out.default_trunk_split = 2;
        out.summary = "tiny_resnet(c=" + std::to_string(base) + ", in=" + std::to_string(c) + "x" +
                      std::to_string(h) + "x" + std::to_string(w) + ")";
    } else {
        throw ParameterError("unknown architecture '" + d.name + "'");
    }
    return out;
}

// Two affine layers with a middle ReLU mapping features to the d-dim
// contrastive embedding space; hidden width equals the input width.
inline Network build_projection_head(int feature_dim, int embed_dim, Rng& rng) {
    Network head;
    head.add(std::make_unique<DenseLayer>(feature_dim, feature_dim, rng, 0.01));
    head.add(std::make_unique<ReLULayer>());
    head.add(std::make_unique<DenseLayer>(feature_dim, embed_dim, rng));
    return head;
}

}  // namespace mcl
