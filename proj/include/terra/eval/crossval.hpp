#pragma once

#include <optional>

#include <nlohmann/json.hpp>

#include "terra/dsp.hpp"
#include "terra/eval/metrics.hpp"
#include "terra/models/cnn.hpp"
#include "terra/models/mamba.hpp"
#include "terra/nn/train.hpp"
#include "terra/pipeline.hpp"

namespace terra::eval {

enum class ModelKind { cnn, mamba };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct EvalConfig {
    ModelKind model = ModelKind::cnn;
    PipelineConfig pipeline;
    dsp::StftConfig stft;
    models::CnnConfig cnn;      // input dims are derived from the data
    models::MambaConfig mamba;  // branch widths are derived from the data
    nn::TrainConfig train;
    bool combined = false;  // resample to common rates on the CNN path
    double combined_imu_rate = 50.0;
    double combined_wheel_rate = 6.5;
    double decimate_ratio = 1.0;
    bool report_unoversampled = true;
    int threads = 0;  // 0 = hardware concurrency
    std::uint64_t seed = 0;
};

struct FoldOutcome {
    FoldReport oversampled;
    std::optional<FoldReport> raw;  // same fold scored on the un-oversampled test set
    nn::TrainResult training;
    std::map<std::string, nn::Tensor> model_state;
    nlohmann::json architecture;
    std::size_t train_partitions = 0;  // after decimation, before oversampling
};

struct CrossValResult {
    std::vector<std::string> class_names;
    std::vector<FoldOutcome> folds;
    Metrics mean;                      // over oversampled test sets
    std::optional<Metrics> mean_raw;

    double mean_accuracy() const { return mean.accuracy; }
    nlohmann::json to_json() const;
};

// Builds one normalized Example per sample of one partition.
std::vector<models::Example> build_examples(const Partition& partition, int label,
                                            const PipelineConfig& pipeline,
                                            const dsp::StftConfig& stft,
                                            const NormalizationStats& norm, ModelKind kind,
                                            int wheel_components);

// The full per-fold pipeline of the evaluation: stratified split, optional
// train decimation, oversampling of both subsets, normalization fitted on
// the training partitions, model training with its validation subdivision,
// and sample-level scoring of the (oversampled) test set.
CrossValResult run_cross_validation(const std::vector<Recording>& recordings,
                                    const std::vector<std::string>& class_names,
                                    const EvalConfig& cfg);

// Resamples recordings to the common rates the CNN needs on the combined
// dataset (imu down to 50 Hz, wheel down to 6.5 Hz by default).
std::vector<Recording> resample_for_combined(const std::vector<Recording>& recordings,
                                             double imu_rate, double wheel_rate);

}  // namespace terra::eval
