#include "terra/signal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "terra/csv.hpp"

namespace terra {

using nlohmann::json;

void Channel::validate() const {
    require(timestamps.size() == values.rows,
            "channel '" + name + "': " + std::to_string(timestamps.size()) + " timestamps vs " +
                std::to_string(values.rows) + " value rows");
    require(timestamps.size() >= 2, "channel '" + name + "': needs at least 2 samples");
    for (std::size_t i = 1; i < timestamps.size(); ++i)
        require(timestamps[i] > timestamps[i - 1],
                "channel '" + name + "': non-monotone timestamps at row " + std::to_string(i));

    std::vector<double> gaps(timestamps.size() - 1);
    for (std::size_t i = 0; i + 1 < timestamps.size(); ++i)
        gaps[i] = timestamps[i + 1] - timestamps[i];
    std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
    const double implied = 1.0 / gaps[gaps.size() / 2];
    require(std::abs(rate - implied) <= 0.05 * implied,
            "channel '" + name + "': declared rate " + std::to_string(rate) +
                " Hz is more than 5% off the implied " + std::to_string(implied) + " Hz");
}

double Recording::overlap_start() const {
    return std::max(imu.timestamps.front(), wheel.timestamps.front());
}

double Recording::overlap_end() const {
    return std::min(imu.timestamps.back(), wheel.timestamps.back());
}

bool DatasetMapping::has_class(const std::string& name) const {
    return std::find(classes.begin(), classes.end(), name) != classes.end();
}

namespace {

GroupMapping group_from_json(const json& j) {
    GroupMapping g;
    g.file = j.at("file").get<std::string>();
    g.time_column = j.at("time_column").get<std::string>();
    g.columns = j.at("columns").get<std::vector<std::string>>();
    g.rate = j.at("rate").get<double>();
    g.optional = j.value("optional", false);
    return g;
}

json group_to_json(const GroupMapping& g) {
    return json{{"file", g.file},
                {"time_column", g.time_column},
                {"columns", g.columns},
                {"rate", g.rate},
                {"optional", g.optional}};
}

Channel read_group(const std::filesystem::path& dir, const std::string& group_name,
                   const GroupMapping& g, std::size_t expected_components) {
    require(g.columns.size() == expected_components,
            "mapping for group '" + group_name + "' declares " + std::to_string(g.columns.size()) +
                " columns, expected " + std::to_string(expected_components));
    const auto path = dir / g.file;
    const auto table = csv::read_table(path);

    const int tcol = table.column_index(g.time_column);
    require(tcol >= 0, path.string() + ": missing time column '" + g.time_column + "'");
    std::vector<int> vcols;
    for (const auto& c : g.columns) {
        const int idx = table.column_index(c);
        require(idx >= 0, path.string() + ": missing column '" + c + "'");
        vcols.push_back(idx);
    }

    Channel ch;
    ch.name = group_name;
    ch.rate = g.rate;
    ch.timestamps.reserve(table.rows.size());
    ch.values = Matrix(table.rows.size(), expected_components);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        ch.timestamps.push_back(table.rows[r][static_cast<std::size_t>(tcol)]);
        for (std::size_t c = 0; c < vcols.size(); ++c)
            ch.values(r, c) = table.rows[r][static_cast<std::size_t>(vcols[c])];
    }
    ch.validate();
    return ch;
}

const std::vector<std::string> kImuColumns = {"wx", "wy", "wz", "ax", "ay", "az"};
const std::vector<std::string> kWheelColumns = {"current_l", "current_r", "vel_l", "vel_r"};
const std::vector<std::string> kCommandColumns = {"vx", "wz"};

void write_group(const std::filesystem::path& path, const Channel& ch,
                 const std::vector<std::string>& columns) {
    std::vector<std::string> header = {"time"};
    header.insert(header.end(), columns.begin(), columns.end());
    std::vector<std::vector<double>> rows(ch.size());
    for (std::size_t r = 0; r < ch.size(); ++r) {
        rows[r].reserve(columns.size() + 1);
        rows[r].push_back(ch.timestamps[r]);
        for (std::size_t c = 0; c < ch.values.cols; ++c) rows[r].push_back(ch.values(r, c));
    }
    csv::write_table(path, header, rows);
}

}  // namespace

DatasetMapping DatasetMapping::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.is_open(), "cannot open mapping config: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail("mapping config " + path.string() + ": " + e.what());
    }
    DatasetMapping m;
    try {
        m.dataset = j.at("dataset").get<std::string>();
        m.classes = j.at("classes").get<std::vector<std::string>>();
        const auto& groups = j.at("groups");
        m.imu = group_from_json(groups.at("imu"));
        m.wheel = group_from_json(groups.at("wheel"));
        if (groups.contains("commands")) m.commands = group_from_json(groups.at("commands"));
    } catch (const json::exception& e) {
        fail("mapping config " + path.string() + ": " + e.what());
    }
    require(!m.classes.empty(), "mapping config " + path.string() + ": empty class list");
    return m;
}

void DatasetMapping::save(const std::filesystem::path& path) const {
    json groups{{"imu", group_to_json(imu)}, {"wheel", group_to_json(wheel)}};
    if (commands) groups["commands"] = group_to_json(*commands);
    json j{{"dataset", dataset}, {"classes", classes}, {"groups", groups}};
    std::ofstream out(path);
    require(out.is_open(), "cannot write mapping config: " + path.string());
    out << j.dump(2) << "\n";
}

DatasetMapping DatasetMapping::canonical(const std::string& dataset,
                                         std::vector<std::string> classes, double imu_rate,
                                         double wheel_rate, bool with_commands) {
    DatasetMapping m;
    m.dataset = dataset;
    m.classes = std::move(classes);
    m.imu = {"imu.csv", "time", kImuColumns, imu_rate, false};
    m.wheel = {"wheel.csv", "time", kWheelColumns, wheel_rate, false};
    if (with_commands) m.commands = GroupMapping{"commands.csv", "time", kCommandColumns, wheel_rate, true};
    return m;
}

Recording ingest_recording(const std::filesystem::path& dir, const DatasetMapping& mapping,
                           const std::string& terrain) {
    require(std::filesystem::is_directory(dir), "recording directory not found: " + dir.string());

    Recording rec;
    rec.id = dir.filename().string();
    rec.dataset = mapping.dataset;
    rec.terrain = terrain.empty() ? dir.parent_path().filename().string() : terrain;
    require(mapping.has_class(rec.terrain),
            "unknown terrain label '" + rec.terrain + "' for dataset '" + mapping.dataset + "'");

    rec.imu = read_group(dir, "imu", mapping.imu, 6);
    rec.wheel = read_group(dir, "wheel", mapping.wheel, 4);
    if (mapping.commands) {
        const auto cmd_path = dir / mapping.commands->file;
        if (std::filesystem::exists(cmd_path))
            rec.commands = read_group(dir, "commands", *mapping.commands, 2);
        else
            require(mapping.commands->optional,
                    "missing required command file: " + cmd_path.string());
    }
    require(rec.overlap_span() > 0.0, "recording " + rec.id + ": imu and wheel do not overlap in time");
    return rec;
}

void export_recording(const Recording& rec, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_group(dir / "imu.csv", rec.imu, kImuColumns);
    write_group(dir / "wheel.csv", rec.wheel, kWheelColumns);
    if (rec.commands) write_group(dir / "commands.csv", *rec.commands, kCommandColumns);
}

Channel resample_channel(const Channel& ch, double target_rate) {
    require(target_rate > 0.0, "resample: target rate must be > 0");
    require(ch.size() >= 2, "resample: channel '" + ch.name + "' has fewer than 2 samples");

    const double t0 = ch.timestamps.front();
    const double span = ch.span();
    require(span * target_rate + 1e-9 >= 1.0,
            "resample: channel '" + ch.name + "' spans less than one output tick");
    const auto n_out = static_cast<std::size_t>(std::floor(span * target_rate + 1e-9)) + 1;

    Channel out;
    out.name = ch.name;
    out.rate = target_rate;
    out.timestamps.resize(n_out);
    out.values = Matrix(n_out, ch.values.cols);

    std::size_t hi = 1;  // input interval cursor; output times are monotone
    for (std::size_t k = 0; k < n_out; ++k) {
        const double t = t0 + static_cast<double>(k) / target_rate;
        out.timestamps[k] = t;
        while (hi + 1 < ch.size() && ch.timestamps[hi] < t) ++hi;
        const double ta = ch.timestamps[hi - 1];
        const double tb = ch.timestamps[hi];
        const double w = std::clamp((t - ta) / (tb - ta), 0.0, 1.0);
        for (std::size_t c = 0; c < ch.values.cols; ++c)
            out.values(k, c) = ch.values(hi - 1, c) + w * (ch.values(hi, c) - ch.values(hi - 1, c));
    }
    return out;
}

double quantile(std::vector<double> values, double q) {
    require(!values.empty(), "quantile of empty set");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

// Same two order statistics and the same interpolation arithmetic as
// quantile(), but fed from an incrementally maintained ordered multiset.
double quantile_from_multiset(const std::multiset<double>& s, double q) {
    const double h = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    auto it = s.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(lo));
    const double vlo = *it;
    if (lo + 1 < s.size()) ++it;
    const double vhi = *it;
    return vlo + (h - static_cast<double>(lo)) * (vhi - vlo);
}

}  // namespace

std::vector<CommandStats> compute_command_stats(const std::vector<Recording>& recordings,
                                                double partition_duration, bool skip_missing,
                                                StatsRoute route) {
    require(partition_duration > 0.0, "command stats: partition duration must be > 0");

    struct Acc {
        std::vector<double> abs_vx, abs_wz;
        std::multiset<double> stream_vx, stream_wz;
        std::size_t n_partitions = 0;
    };
    std::vector<std::string> order;
    std::map<std::string, Acc> by_terrain;

    bool any = false;
    for (const auto& rec : recordings) {
        if (!rec.commands) {
            require(skip_missing, "recording " + rec.id + " has no command channel");
            continue;
        }
        any = true;
        if (!by_terrain.count(rec.terrain)) order.push_back(rec.terrain);
        auto& acc = by_terrain[rec.terrain];
        const auto& cmd = *rec.commands;
        for (std::size_t r = 0; r < cmd.size(); ++r) {
            const double vx = std::abs(cmd.values(r, 0));
            const double wz = std::abs(cmd.values(r, 1));
            if (route == StatsRoute::sort_based) {
                acc.abs_vx.push_back(vx);
                acc.abs_wz.push_back(wz);
            } else {
                acc.stream_vx.insert(vx);
                acc.stream_wz.insert(wz);
            }
        }
        acc.n_partitions +=
            static_cast<std::size_t>(std::floor(rec.overlap_span() / partition_duration + 1e-9));
    }
    require(any, "no recording carries a command channel");

    std::vector<CommandStats> out;
    for (const auto& terrain : order) {
        auto& acc = by_terrain[terrain];
        CommandStats s;
        s.terrain = terrain;
        s.n_partitions = acc.n_partitions;
        if (route == StatsRoute::sort_based) {
            s.median_abs_vx = quantile(acc.abs_vx, 0.5);
            s.iqr_abs_vx = quantile(acc.abs_vx, 0.75) - quantile(acc.abs_vx, 0.25);
            s.median_abs_wz = quantile(acc.abs_wz, 0.5);
            s.iqr_abs_wz = quantile(acc.abs_wz, 0.75) - quantile(acc.abs_wz, 0.25);
        } else {
            s.median_abs_vx = quantile_from_multiset(acc.stream_vx, 0.5);
            s.iqr_abs_vx = quantile_from_multiset(acc.stream_vx, 0.75) -
                           quantile_from_multiset(acc.stream_vx, 0.25);
            s.median_abs_wz = quantile_from_multiset(acc.stream_wz, 0.5);
            s.iqr_abs_wz = quantile_from_multiset(acc.stream_wz, 0.75) -
                           quantile_from_multiset(acc.stream_wz, 0.25);
        }
        out.push_back(s);
    }
    return out;
}

std::vector<Recording> ingest_dataset(const std::filesystem::path& root,
                                      const DatasetMapping& mapping) {
    require(std::filesystem::is_directory(root), "dataset root not found: " + root.string());
    std::vector<std::filesystem::path> terrain_dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory()) terrain_dirs.push_back(entry.path());
    std::sort(terrain_dirs.begin(), terrain_dirs.end());
    require(!terrain_dirs.empty(), "dataset root has no terrain directories: " + root.string());

    std::vector<Recording> out;
    for (const auto& tdir : terrain_dirs) {
        const std::string terrain = tdir.filename().string();
        std::vector<std::filesystem::path> rec_dirs;
        for (const auto& entry : std::filesystem::directory_iterator(tdir))
            if (entry.is_directory()) rec_dirs.push_back(entry.path());
        std::sort(rec_dirs.begin(), rec_dirs.end());
        for (const auto& rdir : rec_dirs) {
            Recording rec = ingest_recording(rdir, mapping, terrain);
            rec.id = terrain + ":" + rdir.filename().string();
            out.push_back(std::move(rec));
        }
    }
    require(!out.empty(), "no recordings found under " + root.string());
    return out;
}

void export_store(const std::vector<Recording>& recordings, const DatasetMapping& mapping,
                  const std::filesystem::path& root) {
    require(!recordings.empty(), "export_store: nothing to export");
    std::filesystem::create_directories(root);

    bool any_commands = false;
    for (const auto& r : recordings) any_commands = any_commands || r.commands.has_value();
    const auto canonical = DatasetMapping::canonical(mapping.dataset, mapping.classes,
                                                     mapping.imu.rate, mapping.wheel.rate,
                                                     any_commands);
    canonical.save(root / "mapping.json");

    std::ofstream manifest(root / "manifest.csv");
    require(manifest.is_open(), "cannot write manifest under " + root.string());
    manifest << "recording_id,terrain,duration_s,imu_rows,wheel_rows,has_commands\n";
    manifest.precision(6);
    for (const auto& rec : recordings) {
        std::string dirname = rec.id;
        if (const auto pos = dirname.find(':'); pos != std::string::npos)
            dirname = dirname.substr(pos + 1);
        export_recording(rec, root / rec.terrain / dirname);
        manifest << rec.id << "," << rec.terrain << "," << rec.overlap_span() << ","
                 << rec.imu.size() << "," << rec.wheel.size() << ","
                 << (rec.commands ? 1 : 0) << "\n";
    }
}

std::vector<Recording> ingest_store(const std::filesystem::path& root) {
    return ingest_dataset(root, DatasetMapping::load(root / "mapping.json"));
}

void write_command_stats(const std::vector<CommandStats>& stats,
                         const std::filesystem::path& path) {
    std::vector<std::vector<double>> rows;
    for (const auto& s : stats)
        rows.push_back({static_cast<double>(s.n_partitions), s.median_abs_vx, s.iqr_abs_vx,
                        s.median_abs_wz, s.iqr_abs_wz});
    std::ofstream out(path);
    require(out.is_open(), "cannot write file: " + path.string());
    out << "terrain,n_partitions,median_abs_vx,iqr_abs_vx,median_abs_wz,iqr_abs_wz\n";
    out.precision(6);
    for (std::size_t i = 0; i < stats.size(); ++i) {
        out << stats[i].terrain;
        for (double v : rows[i]) out << "," << v;
        out << "\n";
    }
}

}  // namespace terra
