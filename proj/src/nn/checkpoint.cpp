#include "terra/nn/checkpoint.hpp"

#include <fstream>

#include "terra/nn/train.hpp"

namespace terra::nn {

namespace {
constexpr char kMagic[] = "TERRACKPT1\n";
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    nlohmann::json index = nlohmann::json::array();
    for (const auto& [name, tensor] : ckpt.tensors)
        index.push_back({{"name", name}, {"shape", tensor.shape}});
    const std::string header =
        nlohmann::json{{"architecture", ckpt.architecture}, {"tensors", index}}.dump();

    std::ofstream out(path, std::ios::binary);
    require(out.is_open(), "cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic) - 1);
    const auto len = static_cast<std::uint64_t>(header.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& [name, tensor] : ckpt.tensors)
        out.write(reinterpret_cast<const char*>(tensor.data.data()),
                  static_cast<std::streamsize>(tensor.data.size() * sizeof(double)));
    require(static_cast<bool>(out), "failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.is_open(), "cannot open checkpoint: " + path.string());

    char magic[sizeof(kMagic) - 1];
    in.read(magic, sizeof(magic));
    require(in && std::string(magic, sizeof(magic)) == kMagic,
            "not a checkpoint file: " + path.string());

    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header(len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(len));
    require(static_cast<bool>(in), "truncated checkpoint header: " + path.string());

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        fail("corrupt checkpoint header in " + path.string() + ": " + e.what());
    }

    Checkpoint ckpt;
    ckpt.architecture = j.at("architecture");
    for (const auto& entry : j.at("tensors")) {
        const auto name = entry.at("name").get<std::string>();
        Tensor t(entry.at("shape").get<std::vector<int>>());
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        require(static_cast<bool>(in), "truncated tensor '" + name + "' in " + path.string());
        ckpt.tensors.emplace(name, std::move(t));
    }
    return ckpt;
}

void write_history(const std::vector<EpochStats>& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.is_open(), "cannot write file: " + path.string());
    out << "epoch,train_loss,train_accuracy,val_accuracy\n";
    out.precision(10);
    for (const auto& e : history)
        out << e.epoch << "," << e.train_loss << "," << e.train_accuracy << "," << e.val_accuracy
            << "\n";
}

}  // namespace terra::nn
