#include "terra/dsp.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace terra::dsp {

std::vector<double> window_coefficients(const WindowSpec& spec) {
    require(spec.n_win >= 2, "window needs n_win >= 2, got " + std::to_string(spec.n_win));
    std::vector<double> w(static_cast<std::size_t>(spec.n_win) + 1, 1.0);
    if (spec.kind == WindowKind::boxcar) return w;
    require(spec.a0 > 0.5 && spec.a0 <= 1.0, "generalized-cosine a0 must lie in (0.5, 1]");
    for (int n = 0; n <= spec.n_win; ++n)
        w[static_cast<std::size_t>(n)] =
            spec.a0 - (1.0 - spec.a0) * std::cos(2.0 * std::numbers::pi * n / spec.n_win);
    return w;
}

int n_win_for_rate(const StftConfig& cfg, double rate) {
    require(rate > 0.0, "stft: rate must be > 0");
    return std::max(2, static_cast<int>(std::llround(cfg.window_duration * rate)));
}

int hop_for_rate(const StftConfig& cfg, double rate) {
    const int n_win = n_win_for_rate(cfg, rate);
    const int hop = n_win - static_cast<int>(std::llround(cfg.overlap_duration * rate));
    require(hop >= 1, "stft: overlap leaves a hop of " + std::to_string(hop) + " samples");
    return hop;
}

ComplexSpectrum stft(const std::vector<double>& signal, double rate, const StftConfig& cfg) {
    const int n_win = n_win_for_rate(cfg, rate);
    const int hop = hop_for_rate(cfg, rate);
    require(signal.size() >= static_cast<std::size_t>(n_win),
            "stft: signal of " + std::to_string(signal.size()) + " samples is shorter than one window (" +
                std::to_string(n_win) + ")");

    const auto window = window_coefficients({cfg.window, cfg.a0, n_win});
    const auto n_frames = (signal.size() - static_cast<std::size_t>(n_win)) / static_cast<std::size_t>(hop) + 1;
    const auto n_bins = static_cast<std::size_t>(n_win / 2) + 1;

    // Precomputed one-period trig table; e^{-i 2 pi f n / N} indexed by (f*n) mod N.
    std::vector<std::complex<double>> twiddle(static_cast<std::size_t>(n_win));
    for (int k = 0; k < n_win; ++k) {
        const double phi = -2.0 * std::numbers::pi * k / n_win;
        twiddle[static_cast<std::size_t>(k)] = {std::cos(phi), std::sin(phi)};
    }

    ComplexSpectrum out;
    out.freq_bins = n_bins;
    out.frames = n_frames;
    out.data.assign(n_bins * n_frames, {0.0, 0.0});

    std::vector<double> frame(static_cast<std::size_t>(n_win));
    for (std::size_t t = 0; t < n_frames; ++t) {
        const std::size_t base = t * static_cast<std::size_t>(hop);
        for (int n = 0; n < n_win; ++n)
            frame[static_cast<std::size_t>(n)] =
                window[static_cast<std::size_t>(n)] * signal[base + static_cast<std::size_t>(n)];
        for (std::size_t f = 0; f < n_bins; ++f) {
            std::complex<double> acc{0.0, 0.0};
            std::size_t idx = 0;
            for (int n = 0; n < n_win; ++n) {
                acc += frame[static_cast<std::size_t>(n)] * twiddle[idx];
                idx += f;
                if (idx >= static_cast<std::size_t>(n_win)) idx -= static_cast<std::size_t>(n_win);
            }
            out.at(f, t) = acc;
        }
    }
    return out;
}

Spectrogram spectrogram(const std::vector<double>& signal, double rate, const StftConfig& cfg,
                        const std::string& component) {
    const auto spec = stft(signal, rate, cfg);
    Spectrogram out;
    out.component = component;
    out.values = Matrix(spec.freq_bins, spec.frames);
    for (std::size_t f = 0; f < spec.freq_bins; ++f)
        for (std::size_t t = 0; t < spec.frames; ++t) {
            const double mag = std::abs(spec.at(f, t));
            out.values(f, t) = cfg.log_magnitude ? std::log1p(mag) : mag;
        }
    return out;
}

MultiChannelSpectrogram assemble_input(const Sample& sample, const StftConfig& cfg) {
    std::vector<Spectrogram> per_component;
    for (const auto& g : sample.groups) {
        std::vector<double> column(g.values.rows);
        for (std::size_t c = 0; c < g.values.cols; ++c) {
            for (std::size_t r = 0; r < g.values.rows; ++r) column[r] = g.values(r, c);
            per_component.push_back(
                spectrogram(column, g.rate, cfg, g.name + "[" + std::to_string(c) + "]"));
        }
    }
    require(!per_component.empty(), "assemble_input: sample has no channel groups");

    MultiChannelSpectrogram out;
    out.channels = per_component.size();
    for (const auto& s : per_component) {
        out.freq_bins = std::max(out.freq_bins, s.values.rows);
        out.frames = std::max(out.frames, s.values.cols);
    }
    out.data.assign(out.channels * out.freq_bins * out.frames, 0.0);
    for (std::size_t c = 0; c < per_component.size(); ++c) {
        const auto& s = per_component[c];
        out.component_names.push_back(s.component);
        out.extents.emplace_back(s.values.rows, s.values.cols);
        for (std::size_t f = 0; f < s.values.rows; ++f)
            for (std::size_t t = 0; t < s.values.cols; ++t) out.at(c, f, t) = s.values(f, t);
    }
    return out;
}

void dump_spectrogram(const MultiChannelSpectrogram& mcs, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.is_open(), "cannot write file: " + path.string());
    out.precision(17);
    out << mcs.channels << " " << mcs.freq_bins << " " << mcs.frames << "\n";
    for (std::size_t c = 0; c < mcs.channels; ++c)
        out << mcs.component_names[c] << " " << mcs.extents[c].first << " " << mcs.extents[c].second
            << "\n";
    for (std::size_t i = 0; i < mcs.data.size(); ++i)
        out << mcs.data[i] << (((i + 1) % mcs.frames == 0) ? "\n" : " ");
}

MultiChannelSpectrogram load_spectrogram_dump(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.is_open(), "cannot open file: " + path.string());
    MultiChannelSpectrogram mcs;
    in >> mcs.channels >> mcs.freq_bins >> mcs.frames;
    require(static_cast<bool>(in), "corrupt spectrogram dump: " + path.string());
    mcs.component_names.resize(mcs.channels);
    mcs.extents.resize(mcs.channels);
    for (std::size_t c = 0; c < mcs.channels; ++c)
        in >> mcs.component_names[c] >> mcs.extents[c].first >> mcs.extents[c].second;
    mcs.data.resize(mcs.channels * mcs.freq_bins * mcs.frames);
    for (auto& v : mcs.data) in >> v;
    require(static_cast<bool>(in), "corrupt spectrogram dump: " + path.string());
    return mcs;
}

}  // namespace terra::dsp
