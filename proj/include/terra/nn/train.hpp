#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <vector>

#include "terra/nn/adam.hpp"
#include "terra/nn/graph.hpp"

namespace terra::nn {

struct TrainConfig {
    int epochs = 40;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double validation_fraction = 0.10;
    std::uint64_t seed = 0;
    int patience = 0;  // 0 disables early stopping
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_val_accuracy = 0.0;
};

void write_history(const std::vector<EpochStats>& history, const std::filesystem::path& path);

// Mini-batch gradient descent with Adam. A deterministic shuffle carves off
// the validation fraction; the checkpoint with the best validation accuracy
// (earliest epoch on ties) is restored into the model before returning.
//
// Model contract: batch_loss(batch, training, &correct) builds the loss
// graph; predict(ex) returns eval-mode logits; parameters(), state(),
// set_state() expose the trainable and persistent state.
template <typename Model, typename Ex>
TrainResult train(Model& model, const std::vector<const Ex*>& examples, const TrainConfig& cfg) {
    require(!examples.empty(), "train: empty training set");
    require(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0,
            "train: validation fraction must lie in (0, 1)");
    require(cfg.batch_size >= 1 && cfg.epochs >= 1, "train: bad epochs/batch size");

    std::vector<const Ex*> shuffled = examples;
    std::mt19937_64 rng(derive_seed(cfg.seed, "train"));
    std::shuffle(shuffled.begin(), shuffled.end(), rng);

    const auto n = shuffled.size();
    auto val_n = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n)));
    val_n = std::min(std::max<std::size_t>(val_n, 1), n - 1);
    std::vector<const Ex*> val(shuffled.end() - static_cast<std::ptrdiff_t>(val_n), shuffled.end());
    std::vector<const Ex*> tr(shuffled.begin(), shuffled.end() - static_cast<std::ptrdiff_t>(val_n));

    Adam opt(model.parameters(), cfg.learning_rate);
    TrainResult result;
    std::map<std::string, Tensor> best_state;
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(tr.begin(), tr.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        int correct = 0;

        // Batch boundaries; a trailing singleton is folded into the previous
        // batch because batch norm needs at least 2 rows in training mode.
        std::vector<std::size_t> bounds{0};
        while (bounds.back() < tr.size()) {
            auto end = std::min(tr.size(), bounds.back() + static_cast<std::size_t>(cfg.batch_size));
            if (tr.size() - end == 1) end = tr.size();
            bounds.push_back(end);
        }

        for (std::size_t bi = 0; bi + 1 < bounds.size(); ++bi) {
            std::vector<const Ex*> batch(tr.begin() + static_cast<std::ptrdiff_t>(bounds[bi]),
                                         tr.begin() + static_cast<std::ptrdiff_t>(bounds[bi + 1]));
            zero_grad(model.parameters());
            int batch_correct = 0;
            Value loss = model.batch_loss(batch, /*training=*/true, &batch_correct);
            const double loss_val = loss->value.data[0];
            if (!std::isfinite(loss_val))
                fail("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                     std::to_string(batches) + " (diverged; lower the learning rate)");
            backward(loss);
            opt.step();
            loss_sum += loss_val;
            correct += batch_correct;
            ++batches;
        }

        int val_correct = 0;
        for (const Ex* ex : val) {
            const Tensor logits = model.predict(*ex);
            if (argmax_row(logits, 0) == ex->label) ++val_correct;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1));
        stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(tr.size());
        stats.val_accuracy = static_cast<double>(val_correct) / static_cast<double>(val.size());
        result.history.push_back(stats);

        if (result.best_epoch < 0 || stats.val_accuracy > result.best_val_accuracy) {
            result.best_epoch = epoch;
            result.best_val_accuracy = stats.val_accuracy;
            best_state = model.state();
            since_best = 0;
        } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
            break;
        }
    }

    model.set_state(best_state);
    return result;
}

}  // namespace terra::nn
