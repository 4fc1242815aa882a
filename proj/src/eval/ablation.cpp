#include "terra/eval/ablation.hpp"

#include <cmath>
#include <fstream>

namespace terra::eval {

PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& points) {
    require(points.size() >= 3, "power-law fit needs at least 3 points, got " +
                                    std::to_string(points.size()));
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const auto n = static_cast<double>(points.size());
    std::vector<double> lx(points.size()), ly(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        require(points[i].first > 0.0 && points[i].second > 0.0,
                "power-law fit needs strictly positive N and error");
        lx[i] = std::log(points[i].first);
        ly[i] = std::log(points[i].second);
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double denom = n * sxx - sx * sx;
    require(std::abs(denom) > 1e-12, "power-law fit: degenerate abscissae");

    PowerLawFit fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double rss = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
        rss += r * r;
    }
    fit.residual_norm = std::sqrt(rss);
    return fit;
}

std::vector<AblationSeries> run_ablation(const std::vector<Recording>& recordings,
                                         const std::vector<std::string>& class_names,
                                         const EvalConfig& base, const std::vector<double>& ratios,
                                         const std::vector<ModelKind>& model_kinds) {
    require(!ratios.empty(), "ablation: no ratios");
    std::vector<AblationSeries> out;
    for (ModelKind kind : model_kinds) {
        AblationSeries series;
        series.model = kind;
        std::vector<std::pair<double, double>> fit_points;
        for (double ratio : ratios) {
            EvalConfig cfg = base;
            cfg.model = kind;
            cfg.decimate_ratio = ratio;
            const auto cv = run_cross_validation(recordings, class_names, cfg);

            std::vector<double> errors;
            double n_train = 0.0;
            for (const auto& f : cv.folds) {
                errors.push_back(100.0 * (1.0 - f.oversampled.metrics.accuracy));
                n_train += static_cast<double>(f.train_partitions);
            }
            n_train /= static_cast<double>(cv.folds.size());

            AblationPoint p;
            p.ratio = ratio;
            p.train_partitions = n_train;
            for (double e : errors) p.mean_error_pct += e;
            p.mean_error_pct /= static_cast<double>(errors.size());
            p.error_q1_pct = quantile(errors, 0.25);
            p.error_q3_pct = quantile(errors, 0.75);
            p.iqr_error_pct = p.error_q3_pct - p.error_q1_pct;
            series.points.push_back(p);
            if (p.mean_error_pct > 0.0) fit_points.emplace_back(n_train, p.mean_error_pct);
        }
        series.fit = fit_power_law(fit_points);
        out.push_back(std::move(series));
    }
    return out;
}

void write_ablation_table(const std::vector<AblationSeries>& series,
                          const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.is_open(), "cannot write file: " + path.string());
    out << "model,ratio,train_partitions,mean_error_pct,iqr_error_pct,error_q1_pct,error_q3_pct\n";
    out.precision(6);
    for (const auto& s : series)
        for (const auto& p : s.points)
            out << to_string(s.model) << "," << p.ratio << "," << p.train_partitions << ","
                << p.mean_error_pct << "," << p.iqr_error_pct << "," << p.error_q1_pct << ","
                << p.error_q3_pct << "\n";
}

}  // namespace terra::eval
