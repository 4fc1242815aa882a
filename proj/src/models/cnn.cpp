#include "terra/models/cnn.hpp"

namespace terra::models {

using nn::Tensor;
using nn::Value;

CnnClassifier::CnnClassifier(const CnnConfig& cfg) : cfg_(cfg) {
    require(cfg.freq_bins >= 3 && cfg.frames >= 3,
            "cnn: input planes must be at least 3x3 for the k=3 stage, got " +
                std::to_string(cfg.freq_bins) + "x" + std::to_string(cfg.frames));
    std::mt19937_64 rng(derive_seed(cfg.seed, "cnn-init"));
    conv1_ = nn::Conv2d(cfg.in_channels, cfg.mid_channels, 1, rng, "conv1");
    bn1_ = nn::BatchNorm2d(cfg.mid_channels, "bn1");
    conv2_ = nn::Conv2d(cfg.mid_channels, cfg.out_channels, 3, rng, "conv2");
    bn2_ = nn::BatchNorm2d(cfg.out_channels, "bn2");
    head_ = nn::Dense(embedding_size(), cfg.num_classes, rng, "head");
}

CnnClassifier::Output CnnClassifier::forward(const Value& input, bool training) {
    const int n = input->value.dim(0);
    Value h = conv1_.forward(input);
    h = bn1_.forward(h, training);
    h = nn::relu(h);
    h = conv2_.forward(h);
    h = bn2_.forward(h, training);
    h = nn::relu(h);
    Value emb = nn::reshape(h, {n, embedding_size()});
    return {head_.forward(emb), emb};
}

Tensor CnnClassifier::pack_batch(const std::vector<const Example*>& batch) const {
    const auto per = static_cast<std::size_t>(cfg_.in_channels) * cfg_.freq_bins * cfg_.frames;
    Tensor packed({static_cast<int>(batch.size()), cfg_.in_channels, cfg_.freq_bins, cfg_.frames});
    for (std::size_t i = 0; i < batch.size(); ++i) {
        require(batch[i]->spec.numel() == per, "cnn: example spectrogram shape mismatch");
        std::copy(batch[i]->spec.data.begin(), batch[i]->spec.data.end(),
                  packed.data.begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    return packed;
}

Value CnnClassifier::batch_loss(const std::vector<const Example*>& batch, bool training,
                                int* correct) {
    auto out = forward(nn::make_input(pack_batch(batch)), training);
    std::vector<int> labels(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = batch[i]->label;
    if (correct) {
        *correct = 0;
        for (std::size_t i = 0; i < batch.size(); ++i)
            if (nn::argmax_row(out.logits->value, static_cast<int>(i)) == labels[i]) ++*correct;
    }
    return nn::softmax_cross_entropy(out.logits, labels);
}

Tensor CnnClassifier::predict(const Example& ex) {
    auto out = forward(nn::make_input(pack_batch({&ex})), /*training=*/false);
    return out.logits->value;
}

Tensor CnnClassifier::embed(const Example& ex) {
    auto out = forward(nn::make_input(pack_batch({&ex})), /*training=*/false);
    Tensor emb({embedding_size()});
    emb.data = out.embedding->value.data;
    return emb;
}

std::vector<Value> CnnClassifier::parameters() const {
    std::vector<Value> out;
    conv1_.collect(out);
    bn1_.collect(out);
    conv2_.collect(out);
    bn2_.collect(out);
    head_.collect(out);
    return out;
}

std::map<std::string, Tensor> CnnClassifier::state() const {
    std::map<std::string, Tensor> s;
    for (const auto& p : parameters()) s[p->name] = p->value;
    bn1_.export_state(s);
    bn2_.export_state(s);
    return s;
}

void CnnClassifier::set_state(const std::map<std::string, Tensor>& s) {
    for (const auto& p : parameters()) {
        const auto it = s.find(p->name);
        require(it != s.end(), "cnn: missing tensor '" + p->name + "' in state");
        require(it->second.shape == p->value.shape, "cnn: shape mismatch for '" + p->name + "'");
        p->value = it->second;
    }
    bn1_.import_state(s);
    bn2_.import_state(s);
}

nlohmann::json CnnClassifier::architecture() const {
    return {{"kind", "cnn"},
            {"in_channels", cfg_.in_channels},
            {"freq_bins", cfg_.freq_bins},
            {"frames", cfg_.frames},
            {"mid_channels", cfg_.mid_channels},
            {"out_channels", cfg_.out_channels},
            {"num_classes", cfg_.num_classes}};
}

CnnClassifier CnnClassifier::from_architecture(const nlohmann::json& arch) {
    require(arch.value("kind", "") == "cnn", "checkpoint does not describe a cnn");
    CnnConfig cfg;
    cfg.in_channels = arch.at("in_channels").get<int>();
    cfg.freq_bins = arch.at("freq_bins").get<int>();
    cfg.frames = arch.at("frames").get<int>();
    cfg.mid_channels = arch.at("mid_channels").get<int>();
    cfg.out_channels = arch.at("out_channels").get<int>();
    cfg.num_classes = arch.at("num_classes").get<int>();
    return CnnClassifier(cfg);
}

}  // namespace terra::models
