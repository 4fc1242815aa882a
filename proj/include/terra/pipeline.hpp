#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "terra/signal.hpp"

namespace terra {

struct PipelineConfig {
    double partition_duration = 5.0;  // s
    double sample_duration = 1.7;     // s
    double sample_stride = 1.0 / 6.5; // s, one low-rate tick
    int folds = 5;
    std::uint64_t seed = 0;
    bool oversample_train = true;
    bool oversample_test = true;
};

// One channel-group slice inside a partition or sample window.
struct GroupSlice {
    std::string name;
    double rate = 0.0;
    Matrix values;
};

// 5 s evaluation unit. Fold assignment and oversampling happen at this level.
struct Partition {
    std::string id;
    std::string recording_id;
    std::string terrain;
    std::string dataset;
    double start_time = 0.0;
    std::vector<GroupSlice> groups;  // fixed order: imu, wheel

    const GroupSlice& group(const std::string& name) const;
};

// 1.7 s model-input window cut from a partition.
struct Sample {
    std::string partition_id;
    std::string terrain;
    std::string dataset;
    double offset = 0.0;  // s, within the partition
    std::vector<GroupSlice> groups;

    const GroupSlice& group(const std::string& name) const;
};

struct FoldSplit {
    int fold = 0;
    std::vector<std::size_t> train;  // indices into the partition list
    std::vector<std::size_t> test;
};

// Per channel-group, per component min/max fitted on training samples only.
struct NormalizationStats {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> min_max;
};

// Consecutive non-overlapping partitions over the imu/wheel overlap span;
// trailing remainder is discarded. Row ranges come from the nominal rate so
// slices stay within one low-rate tick of the configured duration.
std::vector<Partition> partition_recording(const Recording& rec, const PipelineConfig& cfg);

// Stratified assignment of partitions to K test folds, deterministic per seed.
std::vector<FoldSplit> split_kfold(const std::vector<Partition>& partitions,
                                   const PipelineConfig& cfg);

// Balances every class up to the maximum class count with uniform
// with-replacement duplicates. Originals are all retained.
std::vector<std::size_t> oversample(const std::vector<Partition>& partitions,
                                    const std::vector<std::size_t>& subset, std::mt19937_64& rng);

// Keeps round(ratio * count) partitions per class, uniform without
// replacement, deterministic per seed. Applied before oversampling.
std::vector<std::size_t> decimate_train(const std::vector<Partition>& partitions,
                                        const std::vector<std::size_t>& train, double ratio,
                                        std::uint64_t seed);

// Sliding windows at the configured stride; all groups cut at the same
// time offsets.
std::vector<Sample> extract_samples(const Partition& p, const PipelineConfig& cfg);

NormalizationStats fit_normalization(const std::vector<Sample>& train_samples);
Sample apply_normalization(const Sample& s, const NormalizationStats& stats);

// Audit table: partition id, class, fold, role (train/test).
void write_fold_manifest(const std::vector<Partition>& partitions,
                         const std::vector<FoldSplit>& folds,
                         const std::filesystem::path& path);

}  // namespace terra
