#include "terra/models/mamba.hpp"

#include <cmath>

namespace terra::models {

using nn::Tensor;
using nn::Value;

MambaBlock::MambaBlock(const MambaConfig& cfg, std::mt19937_64& rng, const std::string& name) {
    const int di = cfg.inner(), ds = cfg.d_state, dr = cfg.rank();

    in_proj = nn::Dense(cfg.d_model, 2 * di, rng, name + ".in_proj", /*with_bias=*/false);
    conv_w = nn::make_param(Tensor::randn({di, cfg.d_conv}, rng, std::sqrt(1.0 / cfg.d_conv)),
                            name + ".conv.weight");
    conv_b = nn::make_param(Tensor({di}), name + ".conv.bias");
    x_proj = nn::Dense(di, dr + 2 * ds, rng, name + ".x_proj", /*with_bias=*/false);

    // Step-size projection: weight uniform in +-dt_rank^-1/2, bias the inverse
    // softplus of a log-uniform draw over [1e-3, 0.1] so softplus(bias) starts
    // in a stable step-size range.
    const double bound = 1.0 / std::sqrt(static_cast<double>(dr));
    dt_proj.weight = nn::make_param(Tensor::uniform({di, dr}, rng, -bound, bound),
                                    name + ".dt_proj.weight");
    Tensor dt_bias({di});
    std::uniform_real_distribution<double> u(std::log(1e-3), std::log(0.1));
    for (auto& v : dt_bias.data) {
        const double dt = std::max(std::exp(u(rng)), 1e-4);
        v = std::log(std::expm1(dt));
    }
    dt_proj.bias = nn::make_param(std::move(dt_bias), name + ".dt_proj.bias");

    // S4D-real style initialization: A_log[c][s] = log(s + 1), so
    // A = -exp(A_log) starts at -1, -2, ..., -d_state per channel.
    Tensor alog({di, ds});
    for (int c = 0; c < di; ++c)
        for (int s = 0; s < ds; ++s) alog.at2(c, s) = std::log(static_cast<double>(s + 1));
    a_log = nn::make_param(std::move(alog), name + ".a_log");
    d_skip = nn::make_param(Tensor({di}, 1.0), name + ".d_skip");

    out_proj = nn::Dense(di, cfg.d_model, rng, name + ".out_proj", /*with_bias=*/false);
}

Value MambaBlock::forward(const Value& x, const MambaConfig& cfg) const {
    const int di = cfg.inner(), ds = cfg.d_state, dr = cfg.rank();

    Value xz = in_proj.forward(x);  // T x 2*d_inner
    Value xs = nn::slice_cols(xz, 0, di);
    Value gate = nn::slice_cols(xz, di, 2 * di);

    Value xc = nn::silu(nn::causal_conv1d(xs, conv_w, conv_b));

    Value dbc = x_proj.forward(xc);  // T x (dt_rank + 2*d_state)
    Value dt_in = nn::slice_cols(dbc, 0, dr);
    Value b_in = nn::slice_cols(dbc, dr, dr + ds);
    Value c_in = nn::slice_cols(dbc, dr + ds, dr + 2 * ds);

    Value delta = nn::softplus(dt_proj.forward(dt_in));  // T x d_inner, > 0
    Value a = nn::neg(nn::exp_of(a_log));                // diagonal, negative real

    Value y = nn::selective_scan(delta, a, b_in, c_in, xc, d_skip, cfg.parallel_scan);
    y = nn::mul(y, nn::silu(gate));
    return out_proj.forward(y);
}

void MambaBlock::collect(std::vector<Value>& out) const {
    in_proj.collect(out);
    out.push_back(conv_w);
    out.push_back(conv_b);
    x_proj.collect(out);
    dt_proj.collect(out);
    out.push_back(a_log);
    out.push_back(d_skip);
    out_proj.collect(out);
}

MambaClassifier::MambaClassifier(const MambaConfig& cfg) : cfg_(cfg) {
    std::mt19937_64 rng(derive_seed(cfg.seed, "mamba-init"));
    imu_proj_ = nn::Dense(cfg.imu_components, cfg.d_model, rng, "imu.proj");
    imu_block_ = MambaBlock(cfg, rng, "imu.block");
    wheel_proj_ = nn::Dense(cfg.wheel_components, cfg.d_model, rng, "wheel.proj");
    wheel_block_ = MambaBlock(cfg, rng, "wheel.block");
    head_ = nn::Dense(2 * cfg.d_model, cfg.num_classes, rng, "head");
}

Value MambaClassifier::branch_forward(const nn::Dense& proj, const MambaBlock& block,
                                      const Tensor& seq) const {
    require(seq.ndim() == 2 && seq.dim(0) >= 1, "mamba: branch input must be a non-empty T x D sequence");
    Value x = nn::make_input(seq);
    Value h = proj.forward(x);             // T x d_model
    Value y = block.forward(h, cfg_);      // T x d_model
    return nn::last_row(y);                // final hidden representation only
}

MambaClassifier::Output MambaClassifier::forward(const Tensor& imu_seq, const Tensor& wheel_seq) {
    require(imu_seq.ndim() == 2 && imu_seq.dim(1) == cfg_.imu_components,
            "mamba: imu sequence must be T x " + std::to_string(cfg_.imu_components));
    require(wheel_seq.ndim() == 2 && wheel_seq.dim(1) == cfg_.wheel_components,
            "mamba: wheel sequence must be T x " + std::to_string(cfg_.wheel_components));
    Value imu_last = branch_forward(imu_proj_, imu_block_, imu_seq);
    Value wheel_last = branch_forward(wheel_proj_, wheel_block_, wheel_seq);
    Value emb = nn::concat_cols(imu_last, wheel_last);  // 1 x 2*d_model
    return {head_.forward(emb), emb};
}

Value MambaClassifier::batch_loss(const std::vector<const Example*>& batch, bool /*training*/,
                                  int* correct) {
    require(!batch.empty(), "mamba: empty batch");
    if (correct) *correct = 0;
    Value total;
    for (const Example* ex : batch) {
        auto out = forward(ex->imu, ex->wheel);
        if (correct && nn::argmax_row(out.logits->value, 0) == ex->label) ++*correct;
        Value loss = nn::softmax_cross_entropy(out.logits, {ex->label});
        total = total ? nn::add(total, loss) : loss;
    }
    return nn::scale(total, 1.0 / static_cast<double>(batch.size()));
}

Tensor MambaClassifier::predict(const Example& ex) { return forward(ex.imu, ex.wheel).logits->value; }

Tensor MambaClassifier::embed(const Example& ex) {
    auto out = forward(ex.imu, ex.wheel);
    Tensor emb({embedding_size()});
    emb.data = out.embedding->value.data;
    return emb;
}

std::vector<Value> MambaClassifier::parameters() const {
    std::vector<Value> out;
    imu_proj_.collect(out);
    imu_block_.collect(out);
    wheel_proj_.collect(out);
    wheel_block_.collect(out);
    head_.collect(out);
    return out;
}

std::map<std::string, Tensor> MambaClassifier::state() const {
    std::map<std::string, Tensor> s;
    for (const auto& p : parameters()) s[p->name] = p->value;
    return s;
}

void MambaClassifier::set_state(const std::map<std::string, Tensor>& s) {
    for (const auto& p : parameters()) {
        const auto it = s.find(p->name);
        require(it != s.end(), "mamba: missing tensor '" + p->name + "' in state");
        require(it->second.shape == p->value.shape, "mamba: shape mismatch for '" + p->name + "'");
        p->value = it->second;
    }
}

nlohmann::json MambaClassifier::architecture() const {
    return {{"kind", "mamba"},
            {"imu_components", cfg_.imu_components},
            {"wheel_components", cfg_.wheel_components},
            {"d_model", cfg_.d_model},
            {"d_state", cfg_.d_state},
            {"d_conv", cfg_.d_conv},
            {"expand", cfg_.expand},
            {"dt_rank", cfg_.rank()},
            {"num_classes", cfg_.num_classes}};
}

MambaClassifier MambaClassifier::from_architecture(const nlohmann::json& arch) {
    require(arch.value("kind", "") == "mamba", "checkpoint does not describe a mamba model");
    MambaConfig cfg;
    cfg.imu_components = arch.at("imu_components").get<int>();
    cfg.wheel_components = arch.at("wheel_components").get<int>();
    cfg.d_model = arch.at("d_model").get<int>();
    cfg.d_state = arch.at("d_state").get<int>();
    cfg.d_conv = arch.at("d_conv").get<int>();
    cfg.expand = arch.at("expand").get<int>();
    cfg.dt_rank = arch.at("dt_rank").get<int>();
    cfg.num_classes = arch.at("num_classes").get<int>();
    return MambaClassifier(cfg);
}

}  // namespace terra::models
