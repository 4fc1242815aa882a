#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace terra {

// All recoverable failures surface as terra::Error with an actionable message.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

// Dense row-major matrix of doubles. The workhorse container for channel
// values, sample windows and spectrogram planes.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool empty() const { return data.empty(); }

    Matrix slice_rows(std::size_t begin, std::size_t count) const {
        Matrix out(count, cols);
        std::copy(data.begin() + static_cast<std::ptrdiff_t>(begin * cols),
                  data.begin() + static_cast<std::ptrdiff_t>((begin + count) * cols),
                  out.data.begin());
        return out;
    }
};

// splitmix64; used to derive independent stream seeds from the root seed so
// parallel folds stay reproducible no matter the scheduling.
inline std::uint64_t mix_seed(std::uint64_t seed) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, const std::string& stage, std::uint64_t index = 0) {
    std::uint64_t h = root;
    for (unsigned char c : stage) h = mix_seed(h ^ c);
    return mix_seed(h ^ (0xabcd0123ULL + index));
}

}  // namespace terra
