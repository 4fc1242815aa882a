#pragma once

#include <cmath>
#include <map>

#include "terra/nn/graph.hpp"

namespace terra::nn {

// Parameter-owning layer wrappers. Initialization draws from the provided
// rng so every model is reproducible from its seed.

struct Dense {
    Value weight;  // out x in
    Value bias;    // out (may be null)

    Dense() = default;
    Dense(int in, int out, std::mt19937_64& rng, const std::string& name, bool with_bias = true) {
        const double std_dev = std::sqrt(2.0 / static_cast<double>(in));
        weight = make_param(Tensor::randn({out, in}, rng, std_dev), name + ".weight");
        if (with_bias) bias = make_param(Tensor({out}), name + ".bias");
    }

    Value forward(const Value& x) const { return linear(x, weight, bias); }

    void collect(std::vector<Value>& out) const {
        out.push_back(weight);
        if (bias) out.push_back(bias);
    }
};

struct Conv2d {
    Value weight;  // out x in x k x k
    Value bias;    // out
    int kernel = 1;

    Conv2d() = default;
    Conv2d(int in, int out, int k, std::mt19937_64& rng, const std::string& name) : kernel(k) {
        const double std_dev = std::sqrt(2.0 / static_cast<double>(in * k * k));
        weight = make_param(Tensor::randn({out, in, k, k}, rng, std_dev), name + ".weight");
        bias = make_param(Tensor({out}), name + ".bias");
    }

    Value forward(const Value& x) const { return conv2d(x, weight, bias); }

    void collect(std::vector<Value>& out) const {
        out.push_back(weight);
        out.push_back(bias);
    }
};

struct BatchNorm2d {
    Value gamma;
    Value beta;
    BatchNormState state;
    std::string name;

    BatchNorm2d() = default;
    BatchNorm2d(int channels, const std::string& n) : name(n) {
        gamma = make_param(Tensor({channels}, 1.0), n + ".gamma");
        beta = make_param(Tensor({channels}), n + ".beta");
    }

    Value forward(const Value& x, bool training) {
        return batch_norm(x, gamma, beta, state, training);
    }

    void collect(std::vector<Value>& out) const {
        out.push_back(gamma);
        out.push_back(beta);
    }

    void export_state(std::map<std::string, Tensor>& dst) const {
        if (state.initialized) {
            dst[name + ".running_mean"] = state.running_mean;
            dst[name + ".running_var"] = state.running_var;
        }
    }

    void import_state(const std::map<std::string, Tensor>& src) {
        const auto mit = src.find(name + ".running_mean");
        const auto vit = src.find(name + ".running_var");
        if (mit != src.end() && vit != src.end()) {
            state.running_mean = mit->second;
            state.running_var = vit->second;
            state.initialized = true;
        }
    }
};

}  // namespace terra::nn
