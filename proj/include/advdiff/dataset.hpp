// Synthetic two-class Gaussian data, sharded across agents.
//
// Each sample's true label is uniform on {-1, +1}; its features are drawn
// from N(+1, I) or N(-1, I) accordingly; the recorded label is the true label
// flipped independently with probability flip_rate.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace advdiff {

/// Non-owning view of one labelled sample.
struct SampleView {
    std::span<const double> x;
    int y = 1;
};

/// Owning sample, used when constructing datasets by hand.
struct Sample {
    std::vector<double> x;
    int y = 1;
};

/// The local dataset S_k of one agent. Features are stored row-major.
class AgentDataset {
public:
    AgentDataset() = default;
    AgentDataset(std::size_t dim, std::vector<double> features, std::vector<int> labels,
                 std::vector<int> true_labels = {});

    static AgentDataset from_samples(std::span<const Sample> samples);

    [[nodiscard]] std::size_t size() const { return labels_.size(); }
    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] bool empty() const { return labels_.empty(); }

    [[nodiscard]] SampleView sample(std::size_t i) const {
        return {std::span<const double>(features_).subspan(i * dim_, dim_), labels_[i]};
    }
    [[nodiscard]] std::span<const double> features() const { return features_; }
    [[nodiscard]] std::span<const int> labels() const { return labels_; }
    /// Label before flipping. Equals labels() for hand-built datasets.
    [[nodiscard]] std::span<const int> true_labels() const { return true_labels_; }

    void set_sample(std::size_t i, SampleView s, int true_label);

    bool operator==(const AgentDataset&) const = default;

private:
    std::size_t dim_ = 0;
    std::vector<double> features_;
    std::vector<int> labels_;
    std::vector<int> true_labels_;
};

/// One agent/sample position, 0-based.
struct ReplacementIndex {
    std::size_t agent = 0;
    std::size_t sample = 0;

    bool operator==(const ReplacementIndex&) const = default;
};

/// The tuple S = (S_1, ..., S_K).
class NetworkDataset {
public:
    NetworkDataset() = default;
    NetworkDataset(std::vector<AgentDataset> agents, std::uint64_t seed = 0, double flip_rate = 0.0);

    [[nodiscard]] std::size_t agents() const { return agents_.size(); }
    [[nodiscard]] std::size_t samples_per_agent() const { return agents_.empty() ? 0 : agents_.front().size(); }
    [[nodiscard]] std::size_t dim() const { return agents_.empty() ? 0 : agents_.front().dim(); }
    [[nodiscard]] const AgentDataset& agent(std::size_t k) const { return agents_.at(k); }
    [[nodiscard]] std::span<const AgentDataset> all_agents() const { return agents_; }
    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] double flip_rate() const { return flip_rate_; }

    [[nodiscard]] bool same_shape(const NetworkDataset& other) const;

    /// FNV-1a over labels and feature bytes; identifies a dataset in run records.
    [[nodiscard]] std::uint64_t fingerprint() const;

    bool operator==(const NetworkDataset& other) const { return agents_ == other.agents_; }

private:
    friend NetworkDataset replace_sample(const NetworkDataset&, const NetworkDataset&, ReplacementIndex);

    std::vector<AgentDataset> agents_;
    std::uint64_t seed_ = 0;
    double flip_rate_ = 0.0;
};

NetworkDataset generate_network_dataset(std::size_t agents, std::size_t samples_per_agent, std::size_t dim,
                                        double flip_rate, std::uint64_t seed);

/// Fresh i.i.d. samples from the same law. Identical to agent 0 of
/// generate_network_dataset(1, size, dim, flip_rate, seed).
AgentDataset generate_holdout(std::size_t size, std::size_t dim, double flip_rate, std::uint64_t seed);

/// Copy of `base` with sample (idx.agent, idx.sample) taken from `donor`.
NetworkDataset replace_sample(const NetworkDataset& base, const NetworkDataset& donor, ReplacementIndex idx);

/// CSV with header `agent,index,y,x_1..x_d`; values written with 17
/// significant digits so a round trip is exact.
void write_dataset_csv(const NetworkDataset& data, const std::filesystem::path& path);
NetworkDataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace advdiff
