#pragma once

#include <complex>
#include <string>
#include <vector>

#include "terra/common.hpp"
#include "terra/pipeline.hpp"

namespace terra::dsp {

enum class WindowKind { hamming, boxcar };

struct WindowSpec {
    WindowKind kind = WindowKind::hamming;
    double a0 = 0.54;  // generalized-cosine coefficient; ignored for boxcar
    int n_win = 0;     // samples per window
};

struct StftConfig {
    double window_duration = 0.4;   // s
    double overlap_duration = 0.2;  // s
    WindowKind window = WindowKind::hamming;
    double a0 = 0.54;
    bool log_magnitude = false;
};

struct ComplexSpectrum {
    std::size_t freq_bins = 0;  // floor(n_win/2) + 1, one-sided
    std::size_t frames = 0;
    std::vector<std::complex<double>> data;  // row-major freq x frames

    std::complex<double>& at(std::size_t f, std::size_t t) { return data[f * frames + t]; }
    std::complex<double> at(std::size_t f, std::size_t t) const { return data[f * frames + t]; }
};

struct Spectrogram {
    std::string component;
    Matrix values;  // freq_bins x frames, non-negative magnitudes
};

// Padded channel-stacked CNN input. Each channel's content occupies the
// top-left (freq, time) block recorded in extents; the rest is exactly zero.
struct MultiChannelSpectrogram {
    std::size_t channels = 0, freq_bins = 0, frames = 0;
    std::vector<double> data;  // channel x freq x time, row-major
    std::vector<std::string> component_names;
    std::vector<std::pair<std::size_t, std::size_t>> extents;  // per channel (F, T)

    double& at(std::size_t c, std::size_t f, std::size_t t) {
        return data[(c * freq_bins + f) * frames + t];
    }
    double at(std::size_t c, std::size_t f, std::size_t t) const {
        return data[(c * freq_bins + f) * frames + t];
    }
};

// w[n] = a0 - (1 - a0) cos(2 pi n / n_win) for 0 <= n <= n_win; n_win + 1
// coefficients with both endpoints equal. Boxcar returns all ones.
std::vector<double> window_coefficients(const WindowSpec& spec);

// Window length in samples at a given rate: round(window_duration * rate),
// floored at 2 so very low-rate channels stay usable.
int n_win_for_rate(const StftConfig& cfg, double rate);
int hop_for_rate(const StftConfig& cfg, double rate);

// Frame t covers samples [t*hop, t*hop + n_win); each frame is multiplied by
// the first n_win window coefficients and DFT'd; one-sided output.
ComplexSpectrum stft(const std::vector<double>& signal, double rate, const StftConfig& cfg);

Spectrogram spectrogram(const std::vector<double>& signal, double rate, const StftConfig& cfg,
                        const std::string& component = "");

// Per-component spectrograms at native rates, zero-padded to the maxima and
// stacked along the channel axis in the sample's stored component order
// (imu wx, wy, wz, ax, ay, az, then wheel current_l, current_r, vel_l, vel_r).
MultiChannelSpectrogram assemble_input(const Sample& sample, const StftConfig& cfg);

// Shape header + row-major values, one file per sample; for golden-file tests.
void dump_spectrogram(const MultiChannelSpectrogram& mcs, const std::filesystem::path& path);
MultiChannelSpectrogram load_spectrogram_dump(const std::filesystem::path& path);

}  // namespace terra::dsp
