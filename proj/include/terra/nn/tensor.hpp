#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "terra/common.hpp"

namespace terra::nn {

// Dense row-major n-d array of doubles. Double precision throughout: models
// are desk-scale and the gradient checks demand it.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
        data.assign(count(shape), fill);
    }
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        require(data.size() == count(shape), "tensor data does not match shape");
    }

    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            require(d >= 0, "negative tensor dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }
    int dim(std::size_t i) const { return shape[i]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // 2-d accessors (rows x cols)
    double& at2(int r, int c) { return data[static_cast<std::size_t>(r) * shape[1] + c]; }
    double at2(int r, int c) const { return data[static_cast<std::size_t>(r) * shape[1] + c]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

    static Tensor randn(std::vector<int> s, std::mt19937_64& rng, double stddev = 1.0) {
        Tensor t(std::move(s));
        std::normal_distribution<double> dist(0.0, stddev);
        for (auto& v : t.data) v = dist(rng);
        return t;
    }

    static Tensor uniform(std::vector<int> s, std::mt19937_64& rng, double lo, double hi) {
        Tensor t(std::move(s));
        std::uniform_real_distribution<double> dist(lo, hi);
        for (auto& v : t.data) v = dist(rng);
        return t;
    }
};

}  // namespace terra::nn
