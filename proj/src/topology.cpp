#include "advdiff/topology.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace advdiff {

TopologyKind parse_topology_kind(std::string_view token) {
    if (token == "complete") return TopologyKind::complete;
    if (token == "isolated") return TopologyKind::isolated;
    if (token == "ring") return TopologyKind::ring;
    if (token == "starlike") return TopologyKind::starlike;
    throw std::invalid_argument("unknown topology '" + std::string(token) +
                                "' (expected complete|isolated|ring|starlike)");
}

std::string to_string(TopologyKind kind) {
    switch (kind) {
        case TopologyKind::complete: return "complete";
        case TopologyKind::isolated: return "isolated";
        case TopologyKind::ring: return "ring";
        case TopologyKind::starlike: return "starlike";
    }
    return "unknown";
}

CombinationMatrix::CombinationMatrix(std::size_t agents, std::vector<double> row_major, std::string name)
    : agents_(agents), weights_(std::move(row_major)), name_(std::move(name)) {
    if (agents_ == 0) throw std::invalid_argument("combination matrix: K must be >= 1");
    if (weights_.size() != agents_ * agents_) {
        throw std::invalid_argument("combination matrix: expected K*K = " + std::to_string(agents_ * agents_) +
                                    " entries, got " + std::to_string(weights_.size()));
    }
    const auto report = validate_combination_matrix(*this);
    if (!report.passed()) {
        throw std::invalid_argument("combination matrix '" + name_ +
                                    "' is not doubly stochastic (max deviation " +
                                    std::to_string(report.max_deviation()) + ")");
    }
}

CombinationMatrix CombinationMatrix::unchecked(std::size_t agents, std::vector<double> row_major,
                                               std::string name) {
    if (row_major.size() != agents * agents) {
        throw std::invalid_argument("combination matrix: expected K*K entries");
    }
    CombinationMatrix m;
    m.agents_ = agents;
    m.weights_ = std::move(row_major);
    m.name_ = std::move(name);
    return m;
}

std::vector<std::size_t> CombinationMatrix::neighbors(std::size_t k) const {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < agents_; ++l) {
        if ((*this)(l, k) > 0.0) out.push_back(l);
    }
    return out;
}

CombinationMatrix build_topology(TopologyKind kind, std::size_t agents) {
    const std::size_t k_count = agents;
    if (k_count < 1) throw std::invalid_argument(to_string(kind) + " topology requires K >= 1");
    std::vector<double> a(k_count * k_count, 0.0);
    auto at = [&](std::size_t l, std::size_t k) -> double& { return a[l * k_count + k]; };

    switch (kind) {
        case TopologyKind::complete:
            std::fill(a.begin(), a.end(), 1.0 / static_cast<double>(k_count));
            break;
        case TopologyKind::isolated:
            for (std::size_t k = 0; k < k_count; ++k) at(k, k) = 1.0;
            break;
        case TopologyKind::ring:
            if (k_count < 3) {
                throw std::invalid_argument("ring topology requires K >= 3 (got K = " + std::to_string(k_count) +
                                            ")");
            }
            for (std::size_t k = 0; k < k_count; ++k) {
                at(k, k) = 1.0 / 3.0;
                at((k + k_count - 1) % k_count, k) = 1.0 / 3.0;
                at((k + 1) % k_count, k) = 1.0 / 3.0;
            }
            break;
        case TopologyKind::starlike: {
            if (k_count < 2) {
                throw std::invalid_argument("starlike topology requires K >= 2 (got K = " +
                                            std::to_string(k_count) + ")");
            }
            const double spoke_total = kStarLeafWeight * static_cast<double>(k_count - 1);
            if (spoke_total > 1.0) {
                throw std::invalid_argument("starlike topology requires 0.05*(K-1) <= 1 (got K = " +
                                            std::to_string(k_count) + ")");
            }
            // Hub is agent 0; its self weight is whatever keeps column 0 stochastic.
            at(0, 0) = 1.0 - spoke_total;
            for (std::size_t k = 1; k < k_count; ++k) {
                at(k, k) = 1.0 - kStarLeafWeight;
                at(0, k) = kStarLeafWeight;
                at(k, 0) = kStarLeafWeight;
            }
            break;
        }
    }
    return CombinationMatrix(k_count, std::move(a), to_string(kind));
}

double ValidationReport::max_deviation() const {
    return std::max({nonnegative.max_deviation, row_sums.max_deviation, column_sums.max_deviation});
}

ValidationReport validate_combination_matrix(const CombinationMatrix& m, double tolerance) {
    ValidationReport report;
    const std::size_t n = m.agents();
    for (std::size_t l = 0; l < n; ++l) {
        for (std::size_t k = 0; k < n; ++k) {
            const double v = m(l, k);
            if (!(v >= 0.0)) {
                report.nonnegative.passed = false;
                report.nonnegative.max_deviation =
                    std::max(report.nonnegative.max_deviation, std::isnan(v) ? INFINITY : -v);
            }
        }
    }
    auto check_sum = [&](ValidationCheck& check, double sum) {
        const double dev = std::abs(sum - 1.0);
        if (!(dev <= tolerance)) check.passed = false;
        check.max_deviation = std::max(check.max_deviation, std::isnan(dev) ? INFINITY : dev);
    };
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        double col = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row += m(i, j);
            col += m(j, i);
        }
        check_sum(report.row_sums, row);
        check_sum(report.column_sums, col);
    }
    return report;
}

double second_largest_eigenvalue_magnitude(const CombinationMatrix& m) {
    const auto n = static_cast<Eigen::Index>(m.agents());
    if (n < 2) return 0.0;
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(
        m.weights().data(), n, n);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd(a), /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    std::vector<double> mags;
    mags.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) mags.push_back(std::abs(solver.eigenvalues()[i]));
    std::sort(mags.begin(), mags.end(), std::greater<>());
    // Doubly stochastic: the leading magnitude is 1. Clamp round-off into [0, 1].
    return std::clamp(mags[1], 0.0, 1.0);
}

}  // namespace advdiff
