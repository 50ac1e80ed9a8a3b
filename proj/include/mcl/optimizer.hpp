// SGD with momentum and weight decay, plus cosine / step learning-rate
// schedules. One optimizer instance owns the union of cohort parameters.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mcl/layers.hpp"

namespace mcl {

class SGD {
public:
    SGD(std::vector<Tensor*> params, double lr, double momentum = 0.9, double weight_decay = 0.0)
        : params_(std::move(params)), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
        for (auto* t : params_) buffers_.emplace_back(Matd::Zero(t->value.rows(), t->value.cols()));
    }

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

    void step() {
        for (size_t i = 0; i < params_.size(); ++i) {
            Tensor* t = params_[i];
            Matd g = t->grad;
            if (weight_decay_ != 0.0) g += weight_decay_ * t->value;
            buffers_[i] = momentum_ * buffers_[i] + g;
            t->value -= lr_ * buffers_[i];
        }
    }
    void zero_grad() {
        for (auto* t : params_) t->zero_grad();
    }

private:
    std::vector<Tensor*> params_;
    std::vector<Matd> buffers_;
    double lr_, momentum_, weight_decay_;
};

// Cosine from base_lr to 0 across total epochs, or step decay at milestones.
inline double scheduled_lr(const std::string& schedule, double base_lr, int epoch,
                           int total_epochs, const std::vector<int>& milestones = {},
                           double decay = 0.1) {
    if (schedule == "cosine") {
        const double t = total_epochs > 0 ? double(epoch) / double(total_epochs) : 0.0;
        return base_lr * 0.5 * (1.0 + std::cos(M_PI * t));
    }
    if (schedule == "step") {
        double lr = base_lr;
        for (int m : milestones)
            if (epoch >= m) lr *= decay;
        return lr;
    }
    throw ParameterError("unknown lr schedule '" + schedule + "'");
}

}  // namespace mcl
