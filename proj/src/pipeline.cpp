#include "terra/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace terra {

namespace {

const GroupSlice& find_group(const std::vector<GroupSlice>& groups, const std::string& name) {
    for (const auto& g : groups)
        if (g.name == name) return g;
    fail("no channel group named '" + name + "'");
}

std::map<std::string, std::vector<std::size_t>> by_class(const std::vector<Partition>& partitions,
                                                         const std::vector<std::size_t>& subset) {
    std::map<std::string, std::vector<std::size_t>> classes;
    for (std::size_t idx : subset) classes[partitions[idx].terrain].push_back(idx);
    return classes;
}

std::size_t row_at(double seconds, double rate) {
    return static_cast<std::size_t>(std::llround(seconds * rate));
}

}  // namespace

const GroupSlice& Partition::group(const std::string& name) const { return find_group(groups, name); }
const GroupSlice& Sample::group(const std::string& name) const { return find_group(groups, name); }

std::vector<Partition> partition_recording(const Recording& rec, const PipelineConfig& cfg) {
    const double dur = cfg.partition_duration;
    require(dur > 0.0, "partition duration must be > 0");
    const double span = rec.overlap_span();
    require(span + 1e-9 >= dur, "recording " + rec.id + " is shorter than one partition (" +
                                    std::to_string(span) + " s < " + std::to_string(dur) + " s)");

    const double start = rec.overlap_start();
    auto n_time = static_cast<std::size_t>(std::floor(span / dur + 1e-9));

    struct Source {
        const Channel* ch;
        std::size_t anchor;  // first row at or after the overlap start
    };
    std::vector<Source> sources;
    for (const Channel* ch : {&rec.imu, &rec.wheel}) {
        const auto it = std::lower_bound(ch->timestamps.begin(), ch->timestamps.end(), start - 1e-9);
        sources.push_back({ch, static_cast<std::size_t>(it - ch->timestamps.begin())});
    }

    // Cap the count so every group has the rows its last slice needs.
    std::size_t n = n_time;
    for (const auto& src : sources) {
        const std::size_t avail = src.ch->size() - src.anchor;
        while (n > 0 && row_at(static_cast<double>(n) * dur, src.ch->rate) > avail) --n;
    }
    require(n >= 1, "recording " + rec.id + " has too few rows for one partition");

    std::vector<Partition> out;
    out.reserve(n);
    for (std::size_t p = 0; p < n; ++p) {
        Partition part;
        part.id = rec.id + "#" + std::to_string(p);
        part.recording_id = rec.id;
        part.terrain = rec.terrain;
        part.dataset = rec.dataset;
        part.start_time = start + static_cast<double>(p) * dur;
        for (const auto& src : sources) {
            const std::size_t row0 = src.anchor + row_at(static_cast<double>(p) * dur, src.ch->rate);
            const std::size_t row1 = src.anchor + row_at(static_cast<double>(p + 1) * dur, src.ch->rate);
            part.groups.push_back({src.ch->name, src.ch->rate, src.ch->values.slice_rows(row0, row1 - row0)});
        }
        out.push_back(std::move(part));
    }
    return out;
}

std::vector<FoldSplit> split_kfold(const std::vector<Partition>& partitions,
                                   const PipelineConfig& cfg) {
    const int K = cfg.folds;
    require(K >= 2, "need at least 2 folds");
    std::vector<std::size_t> all(partitions.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto classes = by_class(partitions, all);

    std::mt19937_64 rng(derive_seed(cfg.seed, "kfold"));
    std::vector<FoldSplit> folds(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) folds[static_cast<std::size_t>(k)].fold = k;

    for (auto& [terrain, idxs] : classes) {
        require(idxs.size() >= static_cast<std::size_t>(K),
                "class '" + terrain + "' has " + std::to_string(idxs.size()) +
                    " partitions, fewer than " + std::to_string(K) + " folds");
        std::sort(idxs.begin(), idxs.end(),
                  [&](std::size_t a, std::size_t b) { return partitions[a].id < partitions[b].id; });
        std::shuffle(idxs.begin(), idxs.end(), rng);
        for (std::size_t j = 0; j < idxs.size(); ++j)
            folds[j % static_cast<std::size_t>(K)].test.push_back(idxs[j]);
    }

    for (auto& f : folds) {
        std::sort(f.test.begin(), f.test.end());
        std::vector<bool> in_test(partitions.size(), false);
        for (std::size_t idx : f.test) in_test[idx] = true;
        for (std::size_t i = 0; i < partitions.size(); ++i)
            if (!in_test[i]) f.train.push_back(i);
    }
    return folds;
}

std::vector<std::size_t> oversample(const std::vector<Partition>& partitions,
                                    const std::vector<std::size_t>& subset, std::mt19937_64& rng) {
    require(!subset.empty(), "oversample: empty subset");
    auto classes = by_class(partitions, subset);
    std::size_t max_count = 0;
    for (const auto& [terrain, idxs] : classes) max_count = std::max(max_count, idxs.size());

    std::vector<std::size_t> out = subset;
    for (auto& [terrain, idxs] : classes) {
        require(!idxs.empty(), "oversample: class '" + terrain + "' is empty");
        std::uniform_int_distribution<std::size_t> pick(0, idxs.size() - 1);
        for (std::size_t add = idxs.size(); add < max_count; ++add) out.push_back(idxs[pick(rng)]);
    }
    return out;
}

std::vector<std::size_t> decimate_train(const std::vector<Partition>& partitions,
                                        const std::vector<std::size_t>& train, double ratio,
                                        std::uint64_t seed) {
    require(ratio > 0.0 && ratio <= 1.0, "decimation ratio must be in (0, 1]");
    if (ratio == 1.0) return train;
    auto classes = by_class(partitions, train);
    std::mt19937_64 rng(derive_seed(seed, "decimate"));

    std::vector<std::size_t> out;
    for (auto& [terrain, idxs] : classes) {
        const auto keep = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(idxs.size())));
        require(keep >= 1, "class '" + terrain + "' decimated to zero partitions at ratio " +
                               std::to_string(ratio));
        std::shuffle(idxs.begin(), idxs.end(), rng);
        out.insert(out.end(), idxs.begin(), idxs.begin() + static_cast<std::ptrdiff_t>(keep));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Sample> extract_samples(const Partition& p, const PipelineConfig& cfg) {
    const double S = cfg.sample_duration;
    const double stride = cfg.sample_stride;
    require(S <= cfg.partition_duration + 1e-9, "sample duration exceeds partition duration");
    require(stride > 0.0, "sample stride must be > 0");

    double min_rate = p.groups.front().rate;
    for (const auto& g : p.groups) min_rate = std::min(min_rate, g.rate);
    require(std::llround(stride * min_rate) >= 1,
            "stride " + std::to_string(stride) + " s rounds to zero ticks at " +
                std::to_string(min_rate) + " Hz");

    const auto count =
        static_cast<std::size_t>(std::floor((cfg.partition_duration - S) / stride + 1e-9)) + 1;

    std::vector<Sample> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        Sample s;
        s.partition_id = p.id;
        s.terrain = p.terrain;
        s.dataset = p.dataset;
        s.offset = static_cast<double>(k) * stride;
        for (const auto& g : p.groups) {
            const std::size_t n_rows = row_at(S, g.rate);
            require(n_rows >= 1 && n_rows <= g.values.rows,
                    "group '" + g.name + "': window of " + std::to_string(n_rows) +
                        " rows does not fit in partition " + p.id);
            // Rounding of offset and duration can overshoot by one row; pull
            // the window back so it stays inside the partition.
            std::size_t row0 = std::min(row_at(s.offset, g.rate), g.values.rows - n_rows);
            s.groups.push_back({g.name, g.rate, g.values.slice_rows(row0, n_rows)});
        }
        out.push_back(std::move(s));
    }
    return out;
}

NormalizationStats fit_normalization(const std::vector<Sample>& train_samples) {
    require(!train_samples.empty(), "fit_normalization: empty training set");
    NormalizationStats stats;
    for (const auto& g : train_samples.front().groups)
        stats.min_max[g.name] = {std::vector<double>(g.values.cols, 1e300),
                                 std::vector<double>(g.values.cols, -1e300)};
    for (const auto& s : train_samples) {
        for (const auto& g : s.groups) {
            auto it = stats.min_max.find(g.name);
            require(it != stats.min_max.end(), "inconsistent sample groups: '" + g.name + "'");
            auto& [mins, maxs] = it->second;
            require(mins.size() == g.values.cols, "inconsistent component count in '" + g.name + "'");
            for (std::size_t r = 0; r < g.values.rows; ++r)
                for (std::size_t c = 0; c < g.values.cols; ++c) {
                    mins[c] = std::min(mins[c], g.values(r, c));
                    maxs[c] = std::max(maxs[c], g.values(r, c));
                }
        }
    }
    return stats;
}

Sample apply_normalization(const Sample& s, const NormalizationStats& stats) {
    Sample out = s;
    for (auto& g : out.groups) {
        const auto it = stats.min_max.find(g.name);
        require(it != stats.min_max.end(), "no normalization stats for group '" + g.name + "'");
        const auto& [mins, maxs] = it->second;
        for (std::size_t c = 0; c < g.values.cols; ++c) {
            const double range = maxs[c] - mins[c];
            for (std::size_t r = 0; r < g.values.rows; ++r)
                g.values(r, c) = range > 0.0 ? (g.values(r, c) - mins[c]) / range : 0.0;
        }
    }
    return out;
}

void write_fold_manifest(const std::vector<Partition>& partitions,
                         const std::vector<FoldSplit>& folds,
                         const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.is_open(), "cannot write file: " + path.string());
    out << "partition_id,class,fold,role\n";
    for (const auto& f : folds) {
        for (std::size_t idx : f.train)
            out << partitions[idx].id << "," << partitions[idx].terrain << "," << f.fold << ",train\n";
        for (std::size_t idx : f.test)
            out << partitions[idx].id << "," << partitions[idx].terrain << "," << f.fold << ",test\n";
    }
}

}  // namespace terra
