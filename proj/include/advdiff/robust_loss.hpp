// Logistic loss under an l2-bounded input perturbation.
//
// For the logistic loss the inner maximisation over ||delta|| <= eps has the
// closed form delta* = -eps * y * w / ||w||, which turns the adversarial loss
// into softplus(-y<x, w> + eps ||w||).
#pragma once

#include "advdiff/dataset.hpp"
#include "advdiff/linalg.hpp"

#include <span>
#include <string>

namespace advdiff {

/// Below this norm w / ||w|| is treated as undefined: the FGM perturbation and
/// the eps-term of the gradient are both taken to be zero.
inline constexpr double kDegenerateNorm = 1e-12;

/// ln(1 + e^z) without overflow.
double softplus(double z);
/// 1 / (1 + e^-z) without overflow.
double sigmoid(double z);

double clean_loss(std::span<const double> w, SampleView s);

Vector fgm_perturbation(std::span<const double> w, int y, double epsilon);

double adversarial_loss(std::span<const double> w, SampleView s, double epsilon);

/// sigma(z) * (-y x + eps w/||w||), z = -y<x,w> + eps||w||.
Vector adversarial_gradient(std::span<const double> w, SampleView s, double epsilon);

/// Writes the gradient into `out` (size d). Used on the training hot path.
void adversarial_gradient_into(std::span<const double> w, SampleView s, double epsilon, std::span<double> out);

enum class ConstantSource { analytic, empirical, user_override };
std::string to_string(ConstantSource source);

/// Smoothness constants: loss Lipschitz in w, gradient Lipschitz in w,
/// gradient Lipschitz in x.
struct LipschitzConstants {
    double L_w = 0.0;
    double L_ww = 0.0;
    double L_wx = 0.0;
    ConstantSource L_w_source = ConstantSource::analytic;
    ConstantSource L_ww_source = ConstantSource::analytic;
    ConstantSource L_wx_source = ConstantSource::analytic;
};

/// Analytic constants for the logistic loss, certified over every input the
/// adversary can reach (||x + delta|| <= R with R = max ||x|| + eps) and over
/// iterates with ||w|| <= iterate_norm_cap:
///   L_w = R,  L_ww = R^2 / 4,  L_wx = 1 + R * B / 4.
/// With eps = 0 these reduce to the constants of the clean loss on the data.
/// Throws on empty input, B <= 0, or all-zero features.
LipschitzConstants estimate_lipschitz_constants(const NetworkDataset& data, const AgentDataset& holdout,
                                                double iterate_norm_cap, double epsilon = 0.0);

}  // namespace advdiff
