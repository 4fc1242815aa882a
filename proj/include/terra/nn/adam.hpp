#pragma once

#include <cmath>

#include "terra/nn/graph.hpp"

namespace terra::nn {

// Adaptive moment estimation with the standard defaults. Learning rate comes
// from the train config.
class Adam {
public:
    explicit Adam(std::vector<Value> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& p : params_) {
            m_.push_back(Tensor(p->value.shape));
            v_.push_back(Tensor(p->value.shape));
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = *params_[i];
            p.ensure_grad();
            for (std::size_t j = 0; j < p.value.data.size(); ++j) {
                const double g = p.grad.data[j];
                m_[i].data[j] = beta1_ * m_[i].data[j] + (1.0 - beta1_) * g;
                v_[i].data[j] = beta2_ * v_[i].data[j] + (1.0 - beta2_) * g * g;
                const double mhat = m_[i].data[j] / bc1;
                const double vhat = v_[i].data[j] / bc2;
                p.value.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    double learning_rate() const { return lr_; }

private:
    std::vector<Value> params_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace terra::nn
