#include "terra/eval/crossval.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <thread>

namespace terra::eval {

using models::Example;

std::string to_string(ModelKind kind) { return kind == ModelKind::cnn ? "cnn" : "mamba"; }

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "cnn") return ModelKind::cnn;
    if (s == "mamba") return ModelKind::mamba;
    fail("unknown model kind '" + s + "' (expected cnn or mamba)");
}

std::vector<Recording> resample_for_combined(const std::vector<Recording>& recordings,
                                             double imu_rate, double wheel_rate) {
    std::vector<Recording> out;
    out.reserve(recordings.size());
    for (const auto& rec : recordings) {
        Recording r = rec;
        if (std::abs(r.imu.rate - imu_rate) > 1e-9) r.imu = resample_channel(r.imu, imu_rate);
        if (std::abs(r.wheel.rate - wheel_rate) > 1e-9) r.wheel = resample_channel(r.wheel, wheel_rate);
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

nn::Tensor matrix_to_tensor(const Matrix& m) {
    nn::Tensor t({static_cast<int>(m.rows), static_cast<int>(m.cols)});
    t.data = m.data;
    return t;
}

nn::Tensor wheel_tensor(const Matrix& m, int components) {
    if (components == static_cast<int>(m.cols)) return matrix_to_tensor(m);
    // velocities-only configuration: keep the trailing columns
    require(components < static_cast<int>(m.cols), "wheel component config exceeds data");
    nn::Tensor t({static_cast<int>(m.rows), components});
    const std::size_t off = m.cols - static_cast<std::size_t>(components);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (int c = 0; c < components; ++c)
            t.at2(static_cast<int>(r), c) = m(r, off + static_cast<std::size_t>(c));
    return t;
}

int label_index(const std::vector<std::string>& class_names, const std::string& terrain) {
    const auto it = std::find(class_names.begin(), class_names.end(), terrain);
    require(it != class_names.end(), "terrain '" + terrain + "' not in the class list");
    return static_cast<int>(it - class_names.begin());
}

void check_classes_present(const std::vector<Partition>& partitions,
                           const std::vector<std::size_t>& subset,
                           const std::vector<std::string>& class_names, const std::string& what) {
    std::set<std::string> seen;
    for (std::size_t idx : subset) seen.insert(partitions[idx].terrain);
    for (const auto& name : class_names)
        require(seen.count(name), "fold " + what + " subset is missing class '" + name + "'");
}

}  // namespace

std::vector<Example> build_examples(const Partition& partition, int label,
                                    const PipelineConfig& pipeline, const dsp::StftConfig& stft,
                                    const NormalizationStats& norm, ModelKind kind,
                                    int wheel_components) {
    std::vector<Example> out;
    for (const auto& sample : extract_samples(partition, pipeline)) {
        const Sample normalized = apply_normalization(sample, norm);
        Example ex;
        ex.label = label;
        if (kind == ModelKind::cnn) {
            const auto mcs = dsp::assemble_input(normalized, stft);
            ex.spec = nn::Tensor({static_cast<int>(mcs.channels), static_cast<int>(mcs.freq_bins),
                                  static_cast<int>(mcs.frames)});
            ex.spec.data = mcs.data;
        } else {
            ex.imu = matrix_to_tensor(normalized.group("imu").values);
            ex.wheel = wheel_tensor(normalized.group("wheel").values, wheel_components);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

namespace {

FoldOutcome process_fold(const std::vector<Partition>& partitions, const FoldSplit& fold,
                         const std::vector<std::string>& class_names, const EvalConfig& cfg) {
    const auto fold_idx = static_cast<std::uint64_t>(fold.fold);

    std::vector<std::size_t> train_idx = fold.train;
    if (cfg.decimate_ratio < 1.0)
        train_idx = decimate_train(partitions, train_idx, cfg.decimate_ratio,
                                   derive_seed(cfg.seed, "decimate", fold_idx));
    const std::size_t train_partitions = train_idx.size();

    check_classes_present(partitions, train_idx, class_names, "train");
    check_classes_present(partitions, fold.test, class_names, "test");

    std::vector<std::size_t> train_os = train_idx;
    if (cfg.pipeline.oversample_train) {
        std::mt19937_64 rng(derive_seed(cfg.seed, "oversample-train", fold_idx));
        train_os = oversample(partitions, train_idx, rng);
    }
    std::vector<std::size_t> test_os = fold.test;
    if (cfg.pipeline.oversample_test) {
        std::mt19937_64 rng(derive_seed(cfg.seed, "oversample-test", fold_idx));
        test_os = oversample(partitions, fold.test, rng);
    }

    // Normalization statistics come from the training partitions only.
    // Duplicates cannot move a min or max, so fitting on the unique set is
    // exact.
    std::vector<Sample> fit_samples;
    for (std::size_t idx : train_idx) {
        auto ss = extract_samples(partitions[idx], cfg.pipeline);
        fit_samples.insert(fit_samples.end(), std::make_move_iterator(ss.begin()),
                           std::make_move_iterator(ss.end()));
    }
    const NormalizationStats norm = fit_normalization(fit_samples);
    fit_samples.clear();
    fit_samples.shrink_to_fit();

    // One example set per distinct partition; oversampled occurrences reuse it.
    std::set<std::size_t> unique_idx(train_os.begin(), train_os.end());
    unique_idx.insert(test_os.begin(), test_os.end());
    std::map<std::size_t, std::vector<Example>> examples;
    for (std::size_t idx : unique_idx)
        examples[idx] =
            build_examples(partitions[idx], label_index(class_names, partitions[idx].terrain),
                           cfg.pipeline, cfg.stft, norm, cfg.model, cfg.mamba.wheel_components);

    auto pointers = [&](const std::vector<std::size_t>& subset) {
        std::vector<const Example*> ptrs;
        for (std::size_t idx : subset)
            for (const auto& ex : examples[idx]) ptrs.push_back(&ex);
        return ptrs;
    };
    const auto train_ptrs = pointers(train_os);
    const auto test_ptrs = pointers(test_os);

    nn::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "train", fold_idx);

    FoldOutcome outcome;
    outcome.train_partitions = train_partitions;

    std::function<nn::Tensor(const Example&)> predict;
    if (cfg.model == ModelKind::cnn) {
        models::CnnConfig mc = cfg.cnn;
        const auto& probe = train_ptrs.front()->spec;
        mc.in_channels = probe.dim(0);
        mc.freq_bins = probe.dim(1);
        mc.frames = probe.dim(2);
        mc.num_classes = static_cast<int>(class_names.size());
        mc.seed = derive_seed(cfg.seed, "model", fold_idx);
        auto model = std::make_shared<models::CnnClassifier>(mc);
        outcome.training = nn::train(*model, train_ptrs, tc);
        outcome.model_state = model->state();
        outcome.architecture = model->architecture();
        predict = [model](const Example& ex) { return model->predict(ex); };
    } else {
        models::MambaConfig mc = cfg.mamba;
        mc.imu_components = train_ptrs.front()->imu.dim(1);
        mc.wheel_components = train_ptrs.front()->wheel.dim(1);
        mc.num_classes = static_cast<int>(class_names.size());
        mc.seed = derive_seed(cfg.seed, "model", fold_idx);
        auto model = std::make_shared<models::MambaClassifier>(mc);
        outcome.training = nn::train(*model, train_ptrs, tc);
        outcome.model_state = model->state();
        outcome.architecture = model->architecture();
        predict = [model](const Example& ex) { return model->predict(ex); };
    }

    auto score = [&](const std::vector<const Example*>& ptrs) {
        ConfusionMatrix cm(static_cast<int>(class_names.size()));
        for (const Example* ex : ptrs) {
            const nn::Tensor logits = predict(*ex);
            cm.add(ex->label, nn::argmax_row(logits, 0));
        }
        FoldReport report;
        report.fold = fold.fold;
        report.cm = cm;
        report.metrics = class_metrics(cm);
        return report;
    };

    outcome.oversampled = score(test_ptrs);
    if (cfg.report_unoversampled) {
        if (cfg.pipeline.oversample_test)
            outcome.raw = score(pointers(fold.test));
        else
            outcome.raw = outcome.oversampled;
    }
    return outcome;
}

}  // namespace

CrossValResult run_cross_validation(const std::vector<Recording>& recordings,
                                    const std::vector<std::string>& class_names,
                                    const EvalConfig& cfg) {
    require(!recordings.empty(), "cross-validation: no recordings");
    require(!class_names.empty(), "cross-validation: empty class list");

    const std::vector<Recording>* source = &recordings;
    std::vector<Recording> resampled;
    if (cfg.combined && cfg.model == ModelKind::cnn) {
        resampled = resample_for_combined(recordings, cfg.combined_imu_rate, cfg.combined_wheel_rate);
        source = &resampled;
    }

    std::vector<Partition> partitions;
    for (const auto& rec : *source) {
        auto parts = partition_recording(rec, cfg.pipeline);
        partitions.insert(partitions.end(), std::make_move_iterator(parts.begin()),
                          std::make_move_iterator(parts.end()));
    }

    PipelineConfig pcfg = cfg.pipeline;
    pcfg.seed = cfg.seed;
    const auto folds = split_kfold(partitions, pcfg);

    unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                       : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(folds.size()));

    CrossValResult result;
    result.class_names = class_names;
    result.folds.resize(folds.size());

    // Bounded wave scheduling: each fold is self-contained and seeded from
    // the root, so results do not depend on the worker count.
    for (std::size_t base = 0; base < folds.size(); base += workers) {
        std::vector<std::future<FoldOutcome>> wave;
        const std::size_t end = std::min(folds.size(), base + workers);
        for (std::size_t k = base; k < end; ++k)
            wave.push_back(std::async(std::launch::async, [&, k] {
                return process_fold(partitions, folds[k], class_names, cfg);
            }));
        for (std::size_t k = base; k < end; ++k) result.folds[k] = wave[k - base].get();
    }

    std::vector<FoldReport> reports, raw_reports;
    for (const auto& f : result.folds) {
        reports.push_back(f.oversampled);
        if (f.raw) raw_reports.push_back(*f.raw);
    }
    result.mean = mean_metrics(reports);
    if (raw_reports.size() == reports.size()) result.mean_raw = mean_metrics(raw_reports);
    return result;
}

namespace {

nlohmann::json metrics_to_json(const Metrics& m, const std::vector<std::string>& names) {
    nlohmann::json per_class = nlohmann::json::array();
    for (std::size_t i = 0; i < m.per_class.size(); ++i) {
        const auto& c = m.per_class[i];
        per_class.push_back({{"terrain", names[i]},
                             {"precision", c.precision},
                             {"recall", c.recall},
                             {"f1", c.f1},
                             {"flagged", c.precision_flagged || c.recall_flagged || c.f1_flagged}});
    }
    return {{"accuracy", m.accuracy}, {"per_class", per_class}};
}

}  // namespace

nlohmann::json CrossValResult::to_json() const {
    nlohmann::json jfolds = nlohmann::json::array();
    for (const auto& f : folds) {
        nlohmann::json jf{{"fold", f.oversampled.fold},
                          {"train_partitions", f.train_partitions},
                          {"metrics", metrics_to_json(f.oversampled.metrics, class_names)},
                          {"confusion", f.oversampled.cm.counts},
                          {"best_epoch", f.training.best_epoch},
                          {"best_val_accuracy", f.training.best_val_accuracy}};
        if (f.raw) jf["metrics_unoversampled"] = metrics_to_json(f.raw->metrics, class_names);
        jfolds.push_back(std::move(jf));
    }
    nlohmann::json j{{"class_names", class_names},
                     {"folds", jfolds},
                     {"mean", metrics_to_json(mean, class_names)}};
    if (mean_raw) j["mean_unoversampled"] = metrics_to_json(*mean_raw, class_names);
    return j;
}

}  // namespace terra::eval
