#include "advdiff/robust_loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace advdiff {

double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double clean_loss(std::span<const double> w, SampleView s) {
    require_same_size(w.size(), s.x.size(), "clean_loss");
    return softplus(-static_cast<double>(s.y) * dot(s.x, w));
}

Vector fgm_perturbation(std::span<const double> w, int y, double epsilon) {
    if (epsilon < 0.0) throw std::invalid_argument("perturbation radius must be >= 0");
    Vector delta(w.size(), 0.0);
    const double norm = norm2(w);
    if (norm <= kDegenerateNorm || epsilon == 0.0) return delta;
    const double scale = -epsilon * static_cast<double>(y) / norm;
    for (std::size_t i = 0; i < w.size(); ++i) delta[i] = scale * w[i];
    return delta;
}

double adversarial_loss(std::span<const double> w, SampleView s, double epsilon) {
    require_same_size(w.size(), s.x.size(), "adversarial_loss");
    return softplus(-static_cast<double>(s.y) * dot(s.x, w) + epsilon * norm2(w));
}

void adversarial_gradient_into(std::span<const double> w, SampleView s, double epsilon, std::span<double> out) {
    require_same_size(w.size(), s.x.size(), "adversarial_gradient");
    require_same_size(w.size(), out.size(), "adversarial_gradient");
    const double y = static_cast<double>(s.y);
    const double norm = norm2(w);
    const double z = -y * dot(s.x, w) + epsilon * norm;
    const double sig = sigmoid(z);
    const double unit_scale = (norm > kDegenerateNorm) ? epsilon / norm : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        out[i] = sig * (-y * s.x[i] + unit_scale * w[i]);
    }
}

Vector adversarial_gradient(std::span<const double> w, SampleView s, double epsilon) {
    Vector g(w.size());
    adversarial_gradient_into(w, s, epsilon, g);
    return g;
}

std::string to_string(ConstantSource source) {
    switch (source) {
        case ConstantSource::analytic: return "analytic";
        case ConstantSource::empirical: return "empirical";
        case ConstantSource::user_override: return "user-override";
    }
    return "unknown";
}

LipschitzConstants estimate_lipschitz_constants(const NetworkDataset& data, const AgentDataset& holdout,
                                                double iterate_norm_cap, double epsilon) {
    if (!(iterate_norm_cap > 0.0)) throw std::invalid_argument("iterate norm cap B must be > 0");
    if (epsilon < 0.0) throw std::invalid_argument("perturbation radius must be >= 0");
    double max_norm = 0.0;
    std::size_t seen = 0;
    auto scan = [&](const AgentDataset& a) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            max_norm = std::max(max_norm, norm2(a.sample(i).x));
            ++seen;
        }
    };
    for (const auto& a : data.all_agents()) scan(a);
    scan(holdout);
    if (seen == 0) throw std::invalid_argument("cannot estimate Lipschitz constants from an empty dataset");
    if (!(max_norm > 0.0)) {
        throw std::invalid_argument("all feature vectors are zero: L_w = 0 violates positivity");
    }
    const double radius = max_norm + epsilon;
    LipschitzConstants c;
    c.L_w = radius;
    c.L_ww = radius * radius / 4.0;
    c.L_wx = 1.0 + radius * iterate_norm_cap / 4.0;
    return c;
}

}  // namespace advdiff
