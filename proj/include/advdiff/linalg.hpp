// Dense vector helpers shared by the loss kernels, the diffusion engine and
// the metrics. Vectors are plain std::vector<double>; read-only arguments are
// taken as spans so callers can pass rows of a contiguous feature matrix.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace advdiff {

using Vector = std::vector<double>;

/// Model parameters w. Same representation as any other dense vector.
using ModelVector = Vector;

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                    " vs " + std::to_string(b) + ")");
    }
}

/// Four-way unrolled dot product. The accumulation order is fixed, so results
/// are reproducible for a given build.
inline double dot(std::span<const double> a, std::span<const double> b) {
    require_same_size(a.size(), b.size(), "dot");
    const std::size_t n = a.size();
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double distance(std::span<const double> a, std::span<const double> b) {
    require_same_size(a.size(), b.size(), "distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return std::sqrt(s);
}

inline bool all_finite(std::span<const double> a) {
    for (double v : a) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

/// Neumaier compensated summation. Used wherever many terms of similar
/// magnitude are averaged (risks, stability distances).
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Mean and standard error (sample std / sqrt(n)) of a sequence.
struct MeanStat {
    double mean = 0.0;
    double std_dev = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
};

inline MeanStat mean_stat(std::span<const double> values) {
    MeanStat out;
    out.count = values.size();
    if (values.empty()) return out;
    CompensatedSum s;
    for (double v : values) s.add(v);
    out.mean = s.value() / static_cast<double>(values.size());
    if (values.size() > 1) {
        CompensatedSum sq;
        for (double v : values) sq.add((v - out.mean) * (v - out.mean));
        out.std_dev = std::sqrt(sq.value() / static_cast<double>(values.size() - 1));
        out.std_error = out.std_dev / std::sqrt(static_cast<double>(values.size()));
    }
    return out;
}

}  // namespace advdiff
