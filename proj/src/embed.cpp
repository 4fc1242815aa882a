#include "terra/embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace terra::embed {

namespace {

Matrix squared_distances(const Matrix& points) {
    const std::size_t n = points.rows, d = points.cols;
    Matrix dist(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = points(i, k) - points(j, k);
                acc += diff * diff;
            }
            dist(i, j) = acc;
            dist(j, i) = acc;
        }
    return dist;
}

}  // namespace

Affinities tsne_affinities(const Matrix& points, double perplexity) {
    const std::size_t n = points.rows;
    require(n >= 3, "t-SNE needs at least 3 points");
    require(perplexity > 1.0, "perplexity must exceed 1");
    require(3.0 * perplexity < static_cast<double>(n),
            "perplexity " + std::to_string(perplexity) + " too large for " + std::to_string(n) +
                " points (needs 3*perplexity < N)");
    const Matrix dist = squared_distances(points);
    const double target_entropy = std::log(perplexity);

    Affinities out;
    out.conditional = Matrix(n, n);
    out.betas.assign(n, 1.0);

    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        double beta = 1.0;
        double beta_lo = -std::numeric_limits<double>::infinity();
        double beta_hi = std::numeric_limits<double>::infinity();
        double sum_p = 0.0;

        for (int iter = 0; iter < 50; ++iter) {
            sum_p = 0.0;
            double sum_dp = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) {
                    row[j] = 0.0;
                    continue;
                }
                row[j] = std::exp(-beta * dist(i, j));
                sum_p += row[j];
                sum_dp += dist(i, j) * row[j];
            }
            require(sum_p > 0.0, "t-SNE: degenerate identical embeddings around point " +
                                     std::to_string(i));
            // Shannon entropy of the conditional distribution in nats.
            const double entropy = std::log(sum_p) + beta * sum_dp / sum_p;
            const double diff = entropy - target_entropy;
            if (std::abs(diff) < 1e-5) break;
            if (diff > 0.0) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : (beta + beta_hi) / 2.0;
            } else {
                beta_hi = beta;
                beta = std::isinf(beta_lo) ? beta / 2.0 : (beta + beta_lo) / 2.0;
            }
        }
        out.betas[i] = beta;
        for (std::size_t j = 0; j < n; ++j) out.conditional(i, j) = row[j] / sum_p;
    }
    return out;
}

Matrix tsne(const Matrix& points, const TsneConfig& cfg, std::vector<double>* kl_history) {
    const std::size_t n = points.rows;
    require(cfg.iterations > 0, "t-SNE: iterations must be > 0");
    const Affinities aff = tsne_affinities(points, cfg.perplexity);

    // Symmetrized joint distribution.
    Matrix p(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            p(i, j) = std::max((aff.conditional(i, j) + aff.conditional(j, i)) /
                                   (2.0 * static_cast<double>(n)),
                               1e-12);

    std::mt19937_64 rng(derive_seed(cfg.seed, "tsne"));
    std::normal_distribution<double> init(0.0, 1e-4);
    Matrix y(n, 2);
    for (auto& v : y.data) v = init(rng);

    Matrix inc(n, 2);
    Matrix gains(n, 2, 1.0);
    Matrix grad(n, 2);
    Matrix qnum(n, n);

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const bool exaggerate = iter < cfg.exaggeration_iters;
        const double p_scale = exaggerate ? cfg.early_exaggeration : 1.0;
        const double momentum = iter < cfg.exaggeration_iters ? 0.5 : 0.8;

        // Student-t kernel numerators and their total.
        double qsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            qnum(i, i) = 0.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dx = y(i, 0) - y(j, 0);
                const double dy = y(i, 1) - y(j, 1);
                const double q = 1.0 / (1.0 + dx * dx + dy * dy);
                qnum(i, j) = q;
                qnum(j, i) = q;
                qsum += 2.0 * q;
            }
        }

        std::fill(grad.data.begin(), grad.data.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double pij = p_scale * p(i, j);
                const double mult = 4.0 * (pij - qnum(i, j) / qsum) * qnum(i, j);
                grad(i, 0) += mult * (y(i, 0) - y(j, 0));
                grad(i, 1) += mult * (y(i, 1) - y(j, 1));
            }

        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < 2; ++k) {
                const bool same_sign = (grad(i, k) > 0.0) == (inc(i, k) > 0.0);
                gains(i, k) = same_sign ? std::max(gains(i, k) * 0.8, 0.01) : gains(i, k) + 0.2;
                inc(i, k) = momentum * inc(i, k) - cfg.learning_rate * gains(i, k) * grad(i, k);
                y(i, k) += inc(i, k);
            }

        // keep the output translation-centered
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += y(i, 0);
            my += y(i, 1);
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y(i, 0) -= mx;
            y(i, 1) -= my;
        }

        if (kl_history) {
            double kl = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    if (i == j) continue;
                    const double qij = std::max(qnum(i, j) / qsum, 1e-12);
                    kl += p(i, j) * std::log(p(i, j) / qij);
                }
            kl_history->push_back(kl);
        }
    }
    return y;
}

double silhouette_score(const Matrix& points, const std::vector<int>& labels) {
    const std::size_t n = points.rows;
    require(labels.size() == n, "silhouette: label count mismatch");
    int k = 0;
    for (int lab : labels) k = std::max(k, lab + 1);
    require(k >= 2, "silhouette needs at least 2 clusters");

    const Matrix d2 = squared_distances(points);
    std::vector<std::size_t> cluster_size(static_cast<std::size_t>(k), 0);
    for (int lab : labels) ++cluster_size[static_cast<std::size_t>(lab)];

    double total = 0.0;
    std::size_t counted = 0;
    std::vector<double> mean_dist(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
        const auto li = static_cast<std::size_t>(labels[i]);
        if (cluster_size[li] < 2) continue;  // silhouette undefined for singletons
        std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            mean_dist[static_cast<std::size_t>(labels[j])] += std::sqrt(d2(i, j));
        }
        const double a = mean_dist[li] / static_cast<double>(cluster_size[li] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
            if (c == li || cluster_size[c] == 0) continue;
            b = std::min(b, mean_dist[c] / static_cast<double>(cluster_size[c]));
        }
        total += (b - a) / std::max(a, b);
        ++counted;
    }
    require(counted > 0, "silhouette: all clusters are singletons");
    return total / static_cast<double>(counted);
}

void write_projection(const Matrix& coords, const EmbeddingSet& set,
                      const std::filesystem::path& path) {
    require(coords.rows == set.size() && coords.cols == 2, "write_projection: shape mismatch");
    std::ofstream out(path);
    require(out.is_open(), "cannot write file: " + path.string());
    out << "x,y,terrain,dataset\n";
    out.precision(10);
    for (std::size_t i = 0; i < coords.rows; ++i)
        out << coords(i, 0) << "," << coords(i, 1) << "," << set.terrains[i] << ","
            << set.datasets[i] << "\n";
}

}  // namespace terra::embed
