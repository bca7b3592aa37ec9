// Doubly stochastic combination matrices for the diffusion network.
//
// Entry a(l, k) is the weight agent k applies to neighbour l's intermediate
// iterate, so the combine step aggregates column k into agent k.
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace advdiff {

enum class TopologyKind { complete, isolated, ring, starlike };

/// Parses `complete|isolated|ring|starlike`.
TopologyKind parse_topology_kind(std::string_view token);
std::string to_string(TopologyKind kind);

/// Weight every star-like agent puts on each of its neighbours.
inline constexpr double kStarLeafWeight = 0.05;
/// Tolerance for the row/column sum checks.
inline constexpr double kStochasticTolerance = 1e-12;

class CombinationMatrix {
public:
    /// Takes a row-major K x K weight array. Throws if the size is not K*K or
    /// if the result is not doubly stochastic within kStochasticTolerance.
    CombinationMatrix(std::size_t agents, std::vector<double> row_major, std::string name = "custom");

    /// Builds without validation. Used to construct deliberately broken
    /// matrices for the validator.
    static CombinationMatrix unchecked(std::size_t agents, std::vector<double> row_major,
                                       std::string name = "custom");

    [[nodiscard]] std::size_t agents() const { return agents_; }
    [[nodiscard]] double operator()(std::size_t l, std::size_t k) const { return weights_[l * agents_ + k]; }
    [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
    [[nodiscard]] const std::string& name() const { return name_; }

    /// {l : a(l, k) > 0}
    [[nodiscard]] std::vector<std::size_t> neighbors(std::size_t k) const;

    bool operator==(const CombinationMatrix& other) const = default;

private:
    CombinationMatrix() = default;

    std::size_t agents_ = 0;
    std::vector<double> weights_;
    std::string name_;
};

CombinationMatrix build_topology(TopologyKind kind, std::size_t agents);

struct ValidationCheck {
    bool passed = true;
    double max_deviation = 0.0;
};

struct ValidationReport {
    ValidationCheck nonnegative;  // max_deviation = magnitude of the most negative entry
    ValidationCheck row_sums;
    ValidationCheck column_sums;

    [[nodiscard]] bool passed() const { return nonnegative.passed && row_sums.passed && column_sums.passed; }
    [[nodiscard]] double max_deviation() const;
};

ValidationReport validate_combination_matrix(const CombinationMatrix& m,
                                             double tolerance = kStochasticTolerance);

/// Magnitude of the second-largest eigenvalue (by magnitude). 0 for the
/// averaging matrix, 1 for the identity with K >= 2.
double second_largest_eigenvalue_magnitude(const CombinationMatrix& m);

}  // namespace advdiff
