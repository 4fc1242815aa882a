#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "terra/common.hpp"

namespace terra::embed {

// Pre-head features with their labels, one row per partition.
struct EmbeddingSet {
    Matrix embeddings;  // N x E
    std::vector<std::string> terrains;
    std::vector<std::string> datasets;

    std::size_t size() const { return embeddings.rows; }
};

struct TsneConfig {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    int exaggeration_iters = 250;
    std::uint64_t seed = 0;
};

// Row-stochastic conditional affinities with per-point bandwidths matched to
// the target perplexity by bisection (1e-5 tolerance on entropy).
struct Affinities {
    Matrix conditional;         // N x N, rows sum to 1, zero diagonal
    std::vector<double> betas;  // precision 1 / (2 sigma_i^2)
};
Affinities tsne_affinities(const Matrix& points, double perplexity);

// Exact O(N^2) t-SNE to 2-D; deterministic per seed, output centered at the
// origin. kl_history, when given, receives the KL divergence per iteration.
Matrix tsne(const Matrix& points, const TsneConfig& cfg, std::vector<double>* kl_history = nullptr);

// Mean silhouette over the given integer labels in the projected space.
double silhouette_score(const Matrix& points, const std::vector<int>& labels);

void write_projection(const Matrix& coords, const EmbeddingSet& set,
                      const std::filesystem::path& path);

}  // namespace terra::embed
