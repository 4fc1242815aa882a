#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "terra/nn/tensor.hpp"

namespace terra::nn {

// Self-describing checkpoint container: a JSON header with an architecture
// descriptor and a tensor index, followed by raw little-endian doubles.
struct Checkpoint {
    nlohmann::json architecture;
    std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace terra::nn
