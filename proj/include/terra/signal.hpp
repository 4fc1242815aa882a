#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "terra/common.hpp"

namespace terra {

// One named channel group: timestamps in seconds plus a T x D value block.
struct Channel {
    std::string name;
    double rate = 0.0;  // nominal sampling frequency, Hz
    std::vector<double> timestamps;
    Matrix values;  // rows == timestamps.size()

    std::size_t size() const { return timestamps.size(); }
    double span() const {
        return timestamps.empty() ? 0.0 : timestamps.back() - timestamps.front();
    }
    void validate() const;  // monotonicity, row count, rate vs spacing
};

// A labeled drive on a single terrain.
struct Recording {
    std::string id;
    std::string terrain;
    std::string dataset;  // "borealtc", "vulpi", or other tag
    Channel imu;                      // D = 6: wx, wy, wz, ax, ay, az
    Channel wheel;                    // D = 4: current_l, current_r, vel_l, vel_r
    std::optional<Channel> commands;  // D = 2: vx, wz

    // Time span where imu and wheel both have data.
    double overlap_start() const;
    double overlap_end() const;
    double overlap_span() const { return overlap_end() - overlap_start(); }
};

// Column layout and nominal rates for one channel group file.
struct GroupMapping {
    std::string file;
    std::string time_column;
    std::vector<std::string> columns;
    double rate = 0.0;
    bool optional = false;
};

// Per-dataset mapping config: how to read one recording directory.
struct DatasetMapping {
    std::string dataset;
    std::vector<std::string> classes;
    GroupMapping imu;
    GroupMapping wheel;
    std::optional<GroupMapping> commands;

    bool has_class(const std::string& name) const;

    static DatasetMapping load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    // Column layout of the canonical store written by export_recording.
    static DatasetMapping canonical(const std::string& dataset,
                                    std::vector<std::string> classes,
                                    double imu_rate, double wheel_rate,
                                    bool with_commands);
};

// Median/IQR of |vx| and |wz| for one terrain, Table-style summary row.
struct CommandStats {
    std::string terrain;
    double median_abs_vx = 0.0;
    double iqr_abs_vx = 0.0;
    double median_abs_wz = 0.0;
    double iqr_abs_wz = 0.0;
    std::size_t n_partitions = 0;
};

// Reads one recording directory laid out per `mapping`. The terrain label is
// taken from `terrain` when non-empty, otherwise from the directory name; it
// must be a member of the mapping's class list.
Recording ingest_recording(const std::filesystem::path& dir, const DatasetMapping& mapping,
                           const std::string& terrain = "");

// Writes the canonical layout: one CSV per channel group, first column
// timestamp seconds. Round-trips exactly through ingest_recording.
void export_recording(const Recording& rec, const std::filesystem::path& dir);

// Linear interpolation onto a uniform grid at target_rate spanning the input
// range. Exact on affine signals; no anti-alias filtering is applied.
Channel resample_channel(const Channel& ch, double target_rate);

// Type-7 quantile (linear interpolation between order statistics).
double quantile(std::vector<double> values, double q);

enum class StatsRoute { sort_based, streaming };

// Per-terrain median/IQR of |vx|, |wz| over all command samples, plus the 5 s
// partition count. Recordings without a command channel raise unless
// skip_missing; raises if none carry commands at all.
std::vector<CommandStats> compute_command_stats(const std::vector<Recording>& recordings,
                                                double partition_duration,
                                                bool skip_missing = false,
                                                StatsRoute route = StatsRoute::sort_based);

void write_command_stats(const std::vector<CommandStats>& stats,
                         const std::filesystem::path& path);

// Dataset walking: root/<terrain>/<recording>/ with files laid out per the
// mapping. Recording ids are "<terrain>:<dirname>".
std::vector<Recording> ingest_dataset(const std::filesystem::path& root,
                                      const DatasetMapping& mapping);

// Canonical store: mapping.json at the root plus one canonical recording
// directory per recording, grouped by terrain, and a manifest table.
void export_store(const std::vector<Recording>& recordings, const DatasetMapping& mapping,
                  const std::filesystem::path& root);
std::vector<Recording> ingest_store(const std::filesystem::path& root);

}  // namespace terra
