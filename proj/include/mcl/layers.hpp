// Dense/conv layers with explicit forward/backward passes. Activations are
// row-per-sample matrices; image tensors are flattened CHW.
#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mcl/types.hpp"

namespace mcl {

using Rng = std::mt19937_64;

struct Tensor {
    Matd value;
    Matd grad;

    Tensor() = default;
    explicit Tensor(Matd v) : value(std::move(v)), grad(Matd::Zero(value.rows(), value.cols())) {}
    Eigen::Index size() const { return value.size(); }
    void zero_grad() { grad.setZero(); }
};

inline Matd he_normal(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / double(fan_in)));
    Matd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

class Layer {
public:
    virtual ~Layer() = default;
    virtual Matd forward(const Matd& x) = 0;    // caches what backward needs
    virtual Matd backward(const Matd& dy) = 0;  // accumulates param grads, returns dx
    virtual std::vector<Tensor*> params() { return {}; }
    virtual std::unique_ptr<Layer> clone() const = 0;
    virtual std::string name() const = 0;
};

// y = x W^T + b
class DenseLayer : public Layer {
public:
    Tensor W;  // out x in
    Tensor b;  // 1 x out

    DenseLayer(Eigen::Index in, Eigen::Index out, Rng& rng, double bias_init = 0.0)
        : W(he_normal(out, in, in, rng)), b(Matd::Constant(1, out, bias_init)) {}
    DenseLayer(const DenseLayer&) = default;

    Matd forward(const Matd& x) override {
        x_ = x;
        return (x * W.value.transpose()).rowwise() + b.value.row(0);
    }
    Matd backward(const Matd& dy) override {
        W.grad += dy.transpose() * x_;
        b.grad.row(0) += dy.colwise().sum();
        return dy * W.value;
    }
    std::vector<Tensor*> params() override { return {&W, &b}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }
    std::string name() const override { return "dense"; }

private:
    Matd x_;
};

class ReLULayer : public Layer {
public:
    Matd forward(const Matd& x) override {
        mask_ = (x.array() > 0.0).cast<double>();
        return x.cwiseProduct(mask_);
    }
    Matd backward(const Matd& dy) override { return dy.cwiseProduct(mask_); }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLULayer>(); }
    std::string name() const override { return "relu"; }

private:
    Matd mask_;
};

// 2-D convolution over flattened CHW rows, implemented with im2col + GEMM.
class Conv2dLayer : public Layer {
public:
    Tensor W;  // Cout x (Cin*k*k)
    Tensor b;  // 1 x Cout

    Conv2dLayer(int cin, int h, int w, int cout, int k, int stride, int pad, Rng& rng)
        : W(he_normal(cout, Eigen::Index(cin) * k * k, Eigen::Index(cin) * k * k, rng)),
          b(Matd::Zero(1, cout)),
          cin_(cin), h_(h), w_(w), cout_(cout), k_(k), stride_(stride), pad_(pad),
          ho_((h + 2 * pad - k) / stride + 1), wo_((w + 2 * pad - k) / stride + 1) {}
    Conv2dLayer(const Conv2dLayer&) = default;

    int out_channels() const { return cout_; }
    int out_h() const { return ho_; }
    int out_w() const { return wo_; }

    Matd forward(const Matd& x) override {
        if (x.cols() != Eigen::Index(cin_) * h_ * w_)
            throw DataError("conv: input has " + std::to_string(x.cols()) + " cols, expected " +
                            std::to_string(cin_ * h_ * w_));
        x_ = x;
        const Eigen::Index B = x.rows(), L = Eigen::Index(ho_) * wo_;
        Matd cols = im2col(x);                     // (B*L) x (Cin*k*k)
        Matd y = cols * W.value.transpose();       // (B*L) x Cout
        y.rowwise() += b.value.row(0);
        Matd out(B, Eigen::Index(cout_) * L);
        for (Eigen::Index s = 0; s < B; ++s)
            for (int c = 0; c < cout_; ++c)
                out.row(s).segment(Eigen::Index(c) * L, L) = y.col(c).segment(s * L, L);
        return out;
    }

    Matd backward(const Matd& dy) override {
        const Eigen::Index B = x_.rows(), L = Eigen::Index(ho_) * wo_;
        Matd dyl(B * L, cout_);
        for (Eigen::Index s = 0; s < B; ++s)
            for (int c = 0; c < cout_; ++c)
                dyl.col(c).segment(s * L, L) = dy.row(s).segment(Eigen::Index(c) * L, L);
        Matd cols = im2col(x_);  // recomputed; caching it across layers is too large
        W.grad += dyl.transpose() * cols;
        b.grad.row(0) += dyl.colwise().sum();
        Matd dcols = dyl * W.value;  // (B*L) x (Cin*k*k)
        return col2im(dcols, B);
    }

    std::vector<Tensor*> params() override { return {&W, &b}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2dLayer>(*this); }
    std::string name() const override { return "conv" + std::to_string(k_) + "x" + std::to_string(k_); }

private:
    Matd im2col(const Matd& x) const {
        const Eigen::Index B = x.rows(), L = Eigen::Index(ho_) * wo_;
        Matd cols = Matd::Zero(B * L, Eigen::Index(cin_) * k_ * k_);
        for (Eigen::Index s = 0; s < B; ++s) {
            const auto row = x.row(s);
            for (int oh = 0; oh < ho_; ++oh)
                for (int ow = 0; ow < wo_; ++ow) {
                    const Eigen::Index r = s * L + Eigen::Index(oh) * wo_ + ow;
                    for (int c = 0; c < cin_; ++c)
                        for (int kh = 0; kh < k_; ++kh) {
                            const int ih = oh * stride_ + kh - pad_;
                            if (ih < 0 || ih >= h_) continue;
                            for (int kw = 0; kw < k_; ++kw) {
                                const int iw = ow * stride_ + kw - pad_;
                                if (iw < 0 || iw >= w_) continue;
                                cols(r, (Eigen::Index(c) * k_ + kh) * k_ + kw) =
                                    row(Eigen::Index(c) * h_ * w_ + Eigen::Index(ih) * w_ + iw);
                            }
                        }
                }
        }
        return cols;
    }

    Matd col2im(const Matd& dcols, Eigen::Index B) const {
        const Eigen::Index L = Eigen::Index(ho_) * wo_;
        Matd dx = Matd::Zero(B, Eigen::Index(cin_) * h_ * w_);
        for (Eigen::Index s = 0; s < B; ++s) {
            auto drow = dx.row(s);
            for (int oh = 0; oh < ho_; ++oh)
                for (int ow = 0; ow < wo_; ++ow) {
                    const Eigen::Index r = s * L + Eigen::Index(oh) * wo_ + ow;
                    for (int c = 0; c < cin_; ++c)
                        for (int kh = 0; kh < k_; ++kh) {
                            const int ih = oh * stride_ + kh - pad_;
                            if (ih < 0 || ih >= h_) continue;
                            for (int kw = 0; kw < k_; ++kw) {
                                const int iw = ow * stride_ + kw - pad_;
                                if (iw < 0 || iw >= w_) continue;
                                drow(Eigen::Index(c) * h_ * w_ + Eigen::Index(ih) * w_ + iw) +=
                                    dcols(r, (Eigen::Index(c) * k_ + kh) * k_ + kw);
                            }
                        }
                }
        }
        return dx;
    }

    Matd x_;
    int cin_, h_, w_, cout_, k_, stride_, pad_;
    int ho_, wo_;
};

// [B x C*H*W] -> [B x C], mean over the spatial extent.
class GlobalAvgPoolLayer : public Layer {
public:
    GlobalAvgPoolLayer(int c, int h, int w) : c_(c), hw_(Eigen::Index(h) * w) {}

    Matd forward(const Matd& x) override {
        const Eigen::Index B = x.rows();
        Matd out(B, c_);
        for (Eigen::Index s = 0; s < B; ++s)
            for (int c = 0; c < c_; ++c)
                out(s, c) = x.row(s).segment(Eigen::Index(c) * hw_, hw_).mean();
        return out;
    }
    Matd backward(const Matd& dy) override {
        const Eigen::Index B = dy.rows();
        Matd dx(B, Eigen::Index(c_) * hw_);
        for (Eigen::Index s = 0; s < B; ++s)
            for (int c = 0; c < c_; ++c)
                dx.row(s).segment(Eigen::Index(c) * hw_, hw_).setConstant(dy(s, c) / double(hw_));
        return dx;
    }
    std::unique_ptr<Layer> clone() const override {
        return std::make_unique<GlobalAvgPoolLayer>(*this);
    }
    std::string name() const override { return "gap"; }

private:
    int c_;
    Eigen::Index hw_;
};

// conv-relu-conv plus identity (or 1x1 projection) skip, ReLU after the add.
class ResidualBlockLayer : public Layer {
public:
    ResidualBlockLayer(int cin, int h, int w, int cout, int stride, Rng& rng)
        : conv1_(cin, h, w, cout, 3, stride, 1, rng),
          conv2_(cout, conv1_.out_h(), conv1_.out_w(), cout, 3, 1, 1, rng) {
        if (stride != 1 || cin != cout)
            proj_ = std::make_unique<Conv2dLayer>(cin, h, w, cout, 1, stride, 0, rng);
    }
    ResidualBlockLayer(const ResidualBlockLayer& o)
        : conv1_(o.conv1_), conv2_(o.conv2_) {
        if (o.proj_) proj_ = std::make_unique<Conv2dLayer>(*o.proj_);
    }

    int out_channels() const { return conv2_.out_channels(); }
    int out_h() const { return conv2_.out_h(); }
    int out_w() const { return conv2_.out_w(); }

    Matd forward(const Matd& x) override {
        Matd h = relu1_.forward(conv1_.forward(x));
        Matd y = conv2_.forward(h);
        Matd skip = proj_ ? proj_->forward(x) : x;
        return relu2_.forward(y + skip);
    }
    Matd backward(const Matd& dy) override {
        Matd dsum = relu2_.backward(dy);
        Matd dx = conv1_.backward(relu1_.backward(conv2_.backward(dsum)));
        dx += proj_ ? proj_->backward(dsum) : dsum;
        return dx;
    }
    std::vector<Tensor*> params() override {
        std::vector<Tensor*> p = conv1_.params();
        for (auto* t : conv2_.params()) p.push_back(t);
        if (proj_)
            for (auto* t : proj_->params()) p.push_back(t);
        return p;
    }
    std::unique_ptr<Layer> clone() const override {
        return std::make_unique<ResidualBlockLayer>(*this);
    }
    std::string name() const override { return "resblock"; }

private:
    Conv2dLayer conv1_;
    Conv2dLayer conv2_;
    std::unique_ptr<Conv2dLayer> proj_;
    ReLULayer relu1_, relu2_;
};

}  // namespace mcl
