// Independent reference computations used only by the tests. Nothing here
// calls into the code paths it is used to check.
#pragma once

#include "advdiff/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline double naive_dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double naive_norm(const Vec& a) { return std::sqrt(naive_dot(a, a)); }

/// ln(1 + e^z) in long double; only valid where it does not overflow.
inline double logistic_ld(double z) {
    const long double zl = z;
    if (zl > 0) return static_cast<double>(zl + std::log1p(std::exp(-zl)));
    return static_cast<double>(std::log1p(std::exp(zl)));
}

/// max over ||delta|| <= eps of ln(1 + exp(-y <x + delta, w>)) by projected
/// gradient ascent: random start inside the ball, `steps` normalised steps of
/// length step_frac * eps, Euclidean projection after each.
inline double inner_max_pga(const Vec& w, const Vec& x, int y, double eps, std::mt19937_64& rng, int steps = 200,
                            double step_frac = 0.05) {
    const std::size_t d = w.size();
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vec delta(d);
    for (auto& v : delta) v = normal(rng);
    const double start_radius = eps * unif(rng);
    const double n0 = naive_norm(delta);
    for (auto& v : delta) v *= start_radius / n0;

    auto loss_at = [&](const Vec& dl) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += (x[i] + dl[i]) * w[i];
        return logistic_ld(-y * s);
    };
    for (int t = 0; t < steps; ++t) {
        // d/d delta ln(1 + e^{-y<x+delta,w>}) = sigma(-y<x+delta,w>) * (-y w)
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += (x[i] + delta[i]) * w[i];
        const double sig = 1.0 / (1.0 + std::exp(y * s));
        Vec g(d);
        for (std::size_t i = 0; i < d; ++i) g[i] = sig * (-y * w[i]);
        const double gn = naive_norm(g);
        if (gn == 0.0) break;
        for (std::size_t i = 0; i < d; ++i) delta[i] += step_frac * eps * g[i] / gn;
        const double dn = naive_norm(delta);
        if (dn > eps) {
            for (auto& v : delta) v *= eps / dn;
        }
    }
    return loss_at(delta);
}

/// Central finite-difference gradient of f at w.
template <class F>
Vec finite_difference_gradient(F&& f, const Vec& w, double h = 1e-6) {
    Vec g(w.size());
    Vec probe = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
        probe[i] = w[i] + h;
        const double up = f(probe);
        probe[i] = w[i] - h;
        const double down = f(probe);
        probe[i] = w[i];
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// Plain single-agent SGD on the clean logistic loss, written from scratch:
/// w <- w + mu * y * x * sigmoid(-y <x, w>).
inline std::vector<Vec> reference_sgd(const std::vector<Vec>& xs, const std::vector<int>& ys,
                                      const std::vector<std::size_t>& order, double mu, std::size_t dim) {
    std::vector<Vec> path;
    Vec w(dim, 0.0);
    for (std::size_t idx : order) {
        const double margin = ys[idx] * naive_dot(xs[idx], w);
        const double sig = 1.0 / (1.0 + std::exp(margin));
        for (std::size_t i = 0; i < dim; ++i) w[i] += mu * ys[idx] * xs[idx][i] * sig;
        path.push_back(w);
    }
    return path;
}

/// out[k] = sum_l a[l][k] phi[l] with a naive triple loop over a dense
/// row-major K x K array.
inline std::vector<Vec> naive_combine(const std::vector<Vec>& phi, const std::vector<double>& a_row_major) {
    const std::size_t K = phi.size();
    const std::size_t d = phi.front().size();
    std::vector<Vec> out(K, Vec(d, 0.0));
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t l = 0; l < K; ++l) out[k][i] += a_row_major[l * K + k] * phi[l][i];
    return out;
}

/// Eigenvalues of the symmetric circulant ring matrix with weight 1/3 on self
/// and both neighbours: 1/3 + (2/3) cos(2 pi m / K).
inline double ring_slem_closed_form(std::size_t K) {
    std::vector<double> mags;
    for (std::size_t m = 0; m < K; ++m) {
        mags.push_back(std::abs(1.0 / 3.0 + 2.0 / 3.0 * std::cos(2.0 * M_PI * static_cast<double>(m) / K)));
    }
    std::sort(mags.begin(), mags.end(), std::greater<>());
    return mags[1];
}

/// Derivative-free minimisation of f over R^2: coarse grid then repeated
/// local refinement around the best point.
template <class F>
Vec grid_refine_minimize_2d(F&& f, double half_width = 10.0, int grid = 81, int rounds = 40) {
    Vec best{0.0, 0.0};
    double best_val = f(best);
    double width = half_width;
    Vec center = best;
    for (int r = 0; r < rounds; ++r) {
        for (int i = 0; i < grid; ++i) {
            for (int j = 0; j < grid; ++j) {
                Vec p{center[0] - width + 2.0 * width * i / (grid - 1), center[1] - width + 2.0 * width * j / (grid - 1)};
                const double v = f(p);
                if (v < best_val) {
                    best_val = v;
                    best = p;
                }
            }
        }
        center = best;
        width *= 0.25;
    }
    return best;
}

}  // namespace oracle
