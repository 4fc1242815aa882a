#pragma once

#include <nlohmann/json.hpp>

#include "terra/models/classifier.hpp"
#include "terra/nn/layers.hpp"

namespace terra::models {

struct CnnConfig {
    int in_channels = 10;
    int freq_bins = 11;
    int frames = 7;
    int mid_channels = 16;
    int out_channels = 32;
    int num_classes = 2;
    std::uint64_t seed = 0;
};

// Spectrogram classifier: 1x1 convolution (per-element MLP across channels),
// batch norm, 3x3 valid convolution, batch norm, then a dense head on the
// flattened feature maps. The flattened pre-head features are the embedding.
class CnnClassifier {
public:
    explicit CnnClassifier(const CnnConfig& cfg);

    struct Output {
        nn::Value logits;     // N x num_classes
        nn::Value embedding;  // N x embedding_size
    };
    Output forward(const nn::Value& input, bool training);

    nn::Value batch_loss(const std::vector<const Example*>& batch, bool training, int* correct);
    nn::Tensor predict(const Example& ex);
    nn::Tensor embed(const Example& ex);

    std::vector<nn::Value> parameters() const;
    std::map<std::string, nn::Tensor> state() const;
    void set_state(const std::map<std::string, nn::Tensor>& s);
    nlohmann::json architecture() const;

    int embedding_size() const {
        return cfg_.out_channels * (cfg_.freq_bins - 2) * (cfg_.frames - 2);
    }
    const CnnConfig& config() const { return cfg_; }

    static CnnClassifier from_architecture(const nlohmann::json& arch);

private:
    nn::Tensor pack_batch(const std::vector<const Example*>& batch) const;

    CnnConfig cfg_;
    nn::Conv2d conv1_, conv2_;
    nn::BatchNorm2d bn1_, bn2_;
    nn::Dense head_;
};

}  // namespace terra::models
