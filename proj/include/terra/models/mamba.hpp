#pragma once

#include <nlohmann/json.hpp>

#include "terra/models/classifier.hpp"
#include "terra/nn/layers.hpp"

namespace terra::models {

struct MambaConfig {
    int imu_components = 6;
    int wheel_components = 4;  // currents + velocities; set 2 to drop currents
    int d_model = 64;
    int d_state = 16;
    int d_conv = 4;
    int expand = 2;
    int dt_rank = 0;  // 0 = ceil(d_model / 16)
    int num_classes = 2;
    std::uint64_t seed = 0;
    bool parallel_scan = true;

    int inner() const { return expand * d_model; }
    int rank() const { return dt_rank > 0 ? dt_rank : (d_model + 15) / 16; }
};

// One selective state-space block: gated input projection, causal depthwise
// convolution, input-dependent (delta, B, C) projections, diagonal
// negative-real A via -exp(A_log), zero-order-hold discretization of A and
// Euler discretization of B inside the scan, multiplicative gate, output
// projection.
struct MambaBlock {
    nn::Dense in_proj;   // d_model -> 2*d_inner, no bias
    nn::Value conv_w;    // d_inner x d_conv, depthwise causal
    nn::Value conv_b;    // d_inner
    nn::Dense x_proj;    // d_inner -> dt_rank + 2*d_state, no bias
    nn::Dense dt_proj;   // dt_rank -> d_inner
    nn::Value a_log;     // d_inner x d_state
    nn::Value d_skip;    // d_inner
    nn::Dense out_proj;  // d_inner -> d_model, no bias

    MambaBlock() = default;
    MambaBlock(const MambaConfig& cfg, std::mt19937_64& rng, const std::string& name);

    nn::Value forward(const nn::Value& x, const MambaConfig& cfg) const;
    void collect(std::vector<nn::Value>& out) const;
};

// Two-branch sequence classifier: each branch projects its raw multi-rate
// input to d_model, runs one Mamba block, and keeps the final hidden
// representation; the concatenation feeds a dense head.
class MambaClassifier {
public:
    explicit MambaClassifier(const MambaConfig& cfg);

    struct Output {
        nn::Value logits;     // 1 x num_classes
        nn::Value embedding;  // 1 x 2*d_model
    };
    Output forward(const nn::Tensor& imu_seq, const nn::Tensor& wheel_seq);

    nn::Value batch_loss(const std::vector<const Example*>& batch, bool training, int* correct);
    nn::Tensor predict(const Example& ex);
    nn::Tensor embed(const Example& ex);

    std::vector<nn::Value> parameters() const;
    std::map<std::string, nn::Tensor> state() const;
    void set_state(const std::map<std::string, nn::Tensor>& s);
    nlohmann::json architecture() const;

    int embedding_size() const { return 2 * cfg_.d_model; }
    const MambaConfig& config() const { return cfg_; }

    static MambaClassifier from_architecture(const nlohmann::json& arch);

private:
    nn::Value branch_forward(const nn::Dense& proj, const MambaBlock& block,
                             const nn::Tensor& seq) const;

    MambaConfig cfg_;
    nn::Dense imu_proj_, wheel_proj_;
    MambaBlock imu_block_, wheel_block_;
    nn::Dense head_;
};

}  // namespace terra::models
