#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "terra/common.hpp"

namespace terra::eval {

// Rows are true classes, columns are predictions.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<long long> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int k) : num_classes(k), counts(static_cast<std::size_t>(k) * k, 0) {}

    void add(int truth, int pred, long long n = 1) {
        require(truth >= 0 && truth < num_classes && pred >= 0 && pred < num_classes,
                "confusion matrix index out of range");
        counts[static_cast<std::size_t>(truth) * num_classes + pred] += n;
    }
    long long at(int truth, int pred) const {
        return counts[static_cast<std::size_t>(truth) * num_classes + pred];
    }
    long long total() const;
    long long trace() const;
};

struct ClassMetric {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // Zero-denominator cases yield 0 and set the flag instead of NaN.
    bool precision_flagged = false;
    bool recall_flagged = false;
    bool f1_flagged = false;
};

struct Metrics {
    std::vector<ClassMetric> per_class;
    double accuracy = 0.0;

    double macro_precision() const;
    double macro_recall() const;
    double macro_f1() const;
};

Metrics class_metrics(const ConfusionMatrix& cm);

struct FoldReport {
    int fold = 0;
    ConfusionMatrix cm;
    Metrics metrics;
};

// Arithmetic mean of per-fold metrics, the aggregation used in the tables.
Metrics mean_metrics(const std::vector<FoldReport>& folds);

// Table with one terrain row: precision, recall, F1 (percent), plus accuracy.
void write_metrics_table(const Metrics& m, const std::vector<std::string>& class_names,
                         const std::filesystem::path& path);

}  // namespace terra::eval
