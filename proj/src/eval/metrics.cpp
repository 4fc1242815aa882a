#include "terra/eval/metrics.hpp"

#include <fstream>
#include <numeric>

namespace terra::eval {

long long ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0LL);
}

long long ConfusionMatrix::trace() const {
    long long t = 0;
    for (int k = 0; k < num_classes; ++k) t += at(k, k);
    return t;
}

double Metrics::macro_precision() const {
    double s = 0.0;
    for (const auto& c : per_class) s += c.precision;
    return per_class.empty() ? 0.0 : s / static_cast<double>(per_class.size());
}

double Metrics::macro_recall() const {
    double s = 0.0;
    for (const auto& c : per_class) s += c.recall;
    return per_class.empty() ? 0.0 : s / static_cast<double>(per_class.size());
}

double Metrics::macro_f1() const {
    double s = 0.0;
    for (const auto& c : per_class) s += c.f1;
    return per_class.empty() ? 0.0 : s / static_cast<double>(per_class.size());
}

Metrics class_metrics(const ConfusionMatrix& cm) {
    require(cm.num_classes > 0, "class_metrics: empty matrix");
    const long long total = cm.total();
    require(total > 0, "class_metrics: matrix has no counts");

    Metrics m;
    m.per_class.resize(static_cast<std::size_t>(cm.num_classes));
    for (int k = 0; k < cm.num_classes; ++k) {
        long long tp = cm.at(k, k), fp = 0, fn = 0;
        for (int j = 0; j < cm.num_classes; ++j) {
            if (j == k) continue;
            fp += cm.at(j, k);
            fn += cm.at(k, j);
        }
        auto& c = m.per_class[static_cast<std::size_t>(k)];
        if (tp + fp > 0)
            c.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        else
            c.precision_flagged = true;
        if (tp + fn > 0)
            c.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        else
            c.recall_flagged = true;
        if (c.precision + c.recall > 0.0)
            c.f1 = 2.0 * c.precision * c.recall / (c.precision + c.recall);
        else
            c.f1_flagged = true;
    }
    m.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
    return m;
}

Metrics mean_metrics(const std::vector<FoldReport>& folds) {
    require(!folds.empty(), "mean_metrics: no folds");
    const auto k = folds.front().metrics.per_class.size();
    Metrics m;
    m.per_class.resize(k);
    for (const auto& f : folds) {
        require(f.metrics.per_class.size() == k, "mean_metrics: inconsistent class counts");
        for (std::size_t i = 0; i < k; ++i) {
            m.per_class[i].precision += f.metrics.per_class[i].precision;
            m.per_class[i].recall += f.metrics.per_class[i].recall;
            m.per_class[i].f1 += f.metrics.per_class[i].f1;
        }
        m.accuracy += f.metrics.accuracy;
    }
    const auto n = static_cast<double>(folds.size());
    for (auto& c : m.per_class) {
        c.precision /= n;
        c.recall /= n;
        c.f1 /= n;
    }
    m.accuracy /= n;
    return m;
}

void write_metrics_table(const Metrics& m, const std::vector<std::string>& class_names,
                         const std::filesystem::path& path) {
    require(m.per_class.size() == class_names.size(), "write_metrics_table: name count mismatch");
    std::ofstream out(path);
    require(out.is_open(), "cannot write file: " + path.string());
    out << "terrain,precision_pct,recall_pct,f1_pct,accuracy_pct\n";
    out.precision(4);
    out << std::fixed;
    for (std::size_t i = 0; i < class_names.size(); ++i) {
        out << class_names[i] << "," << 100.0 * m.per_class[i].precision << ","
            << 100.0 * m.per_class[i].recall << "," << 100.0 * m.per_class[i].f1 << ","
            << 100.0 * m.accuracy << "\n";
    }
}

}  // namespace terra::eval
