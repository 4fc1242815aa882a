#pragma once

#include "terra/eval/crossval.hpp"

namespace terra::eval {

struct AblationPoint {
    double ratio = 1.0;
    double train_partitions = 0.0;  // mean over folds, after decimation
    double mean_error_pct = 0.0;    // 100 * (1 - accuracy), mean over folds
    double iqr_error_pct = 0.0;     // IQR of the per-fold errors
    double error_q1_pct = 0.0;
    double error_q3_pct = 0.0;
};

struct PowerLawFit {
    double intercept = 0.0;  // a in log(error) = a + b log(N)
    double slope = 0.0;      // b
    double residual_norm = 0.0;
};

struct AblationSeries {
    ModelKind model;
    std::vector<AblationPoint> points;
    PowerLawFit fit;
};

// Ordinary least squares on (log N, log error); needs >= 3 strictly
// positive points.
PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& points);

// Full cross-validation per decimation ratio and model, then a power-law fit
// of mean test error against train-set size.
std::vector<AblationSeries> run_ablation(const std::vector<Recording>& recordings,
                                         const std::vector<std::string>& class_names,
                                         const EvalConfig& base,
                                         const std::vector<double>& ratios,
                                         const std::vector<ModelKind>& model_kinds);

void write_ablation_table(const std::vector<AblationSeries>& series,
                          const std::filesystem::path& path);

}  // namespace terra::eval
