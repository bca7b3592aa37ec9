#include "advdiff/dataset.hpp"

#include "advdiff/format.hpp"
#include "advdiff/rng.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace advdiff {

namespace {

void check_label(int y) {
    if (y != 1 && y != -1) throw std::invalid_argument("label must be -1 or +1, got " + std::to_string(y));
}

void check_features(std::span<const double> x) {
    for (double v : x) {
        if (!std::isfinite(v)) throw std::invalid_argument("sample features must be finite");
    }
}

void check_generation_args(std::size_t agents, std::size_t per_agent, std::size_t dim, double flip_rate) {
    if (agents < 1) throw std::invalid_argument("K must be >= 1");
    if (per_agent < 1) throw std::invalid_argument("N must be >= 1");
    if (dim < 1) throw std::invalid_argument("d must be >= 1");
    if (!(flip_rate >= 0.0 && flip_rate <= 1.0)) {
        throw std::invalid_argument("flip_rate must lie in [0, 1]");
    }
}

}  // namespace

AgentDataset::AgentDataset(std::size_t dim, std::vector<double> features, std::vector<int> labels,
                           std::vector<int> true_labels)
    : dim_(dim), features_(std::move(features)), labels_(std::move(labels)), true_labels_(std::move(true_labels)) {
    if (dim_ == 0) throw std::invalid_argument("dataset dimension must be >= 1");
    if (features_.size() != labels_.size() * dim_) {
        throw std::invalid_argument("dataset: feature array size does not match N*d");
    }
    if (true_labels_.empty()) true_labels_ = labels_;
    if (true_labels_.size() != labels_.size()) throw std::invalid_argument("dataset: true label count mismatch");
    for (int y : labels_) check_label(y);
    for (int y : true_labels_) check_label(y);
    check_features(features_);
}

AgentDataset AgentDataset::from_samples(std::span<const Sample> samples) {
    if (samples.empty()) return {};
    const std::size_t dim = samples.front().x.size();
    std::vector<double> features;
    std::vector<int> labels;
    features.reserve(samples.size() * dim);
    for (const auto& s : samples) {
        if (s.x.size() != dim) throw std::invalid_argument("dataset: samples have differing dimensions");
        features.insert(features.end(), s.x.begin(), s.x.end());
        labels.push_back(s.y);
    }
    return AgentDataset(dim, std::move(features), std::move(labels));
}

void AgentDataset::set_sample(std::size_t i, SampleView s, int true_label) {
    if (i >= size()) throw std::out_of_range("sample index out of range");
    if (s.x.size() != dim_) throw std::invalid_argument("sample dimension mismatch");
    check_label(s.y);
    std::copy(s.x.begin(), s.x.end(), features_.begin() + static_cast<std::ptrdiff_t>(i * dim_));
    labels_[i] = s.y;
    true_labels_[i] = true_label;
}

NetworkDataset::NetworkDataset(std::vector<AgentDataset> agents, std::uint64_t seed, double flip_rate)
    : agents_(std::move(agents)), seed_(seed), flip_rate_(flip_rate) {
    if (agents_.empty()) throw std::invalid_argument("network dataset needs at least one agent");
    const auto n = agents_.front().size();
    const auto d = agents_.front().dim();
    for (const auto& a : agents_) {
        if (a.size() != n || a.dim() != d) {
            throw std::invalid_argument("network dataset: all agents must share N and d");
        }
    }
}

bool NetworkDataset::same_shape(const NetworkDataset& other) const {
    return agents() == other.agents() && samples_per_agent() == other.samples_per_agent() && dim() == other.dim();
}

std::uint64_t NetworkDataset::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& a : agents_) {
        feed(a.labels().data(), a.labels().size_bytes());
        feed(a.features().data(), a.features().size_bytes());
    }
    return h;
}

NetworkDataset generate_network_dataset(std::size_t agents, std::size_t samples_per_agent, std::size_t dim,
                                        double flip_rate, std::uint64_t seed) {
    check_generation_args(agents, samples_per_agent, dim, flip_rate);
    RandomStream feature_stream(derive_seed(seed, StreamTag::features));
    RandomStream flip_stream(derive_seed(seed, StreamTag::flips));

    std::vector<AgentDataset> shards;
    shards.reserve(agents);
    for (std::size_t k = 0; k < agents; ++k) {
        std::vector<double> features(samples_per_agent * dim);
        std::vector<int> labels(samples_per_agent);
        std::vector<int> truth(samples_per_agent);
        for (std::size_t i = 0; i < samples_per_agent; ++i) {
            const int y_true = (feature_stream.next_u64() >> 63) != 0 ? 1 : -1;
            const double mean = static_cast<double>(y_true);
            for (std::size_t j = 0; j < dim; ++j) features[i * dim + j] = mean + feature_stream.gaussian();
            truth[i] = y_true;
            labels[i] = flip_stream.bernoulli(flip_rate) ? -y_true : y_true;
        }
        shards.emplace_back(dim, std::move(features), std::move(labels), std::move(truth));
    }
    return NetworkDataset(std::move(shards), seed, flip_rate);
}

AgentDataset generate_holdout(std::size_t size, std::size_t dim, double flip_rate, std::uint64_t seed) {
    if (size == 0) throw std::invalid_argument("holdout size must be >= 1");
    auto net = generate_network_dataset(1, size, dim, flip_rate, seed);
    return net.agent(0);
}

NetworkDataset replace_sample(const NetworkDataset& base, const NetworkDataset& donor, ReplacementIndex idx) {
    if (!base.same_shape(donor)) throw std::invalid_argument("replace_sample: datasets differ in shape");
    if (idx.agent >= base.agents() || idx.sample >= base.samples_per_agent()) {
        throw std::out_of_range("replace_sample: index (agent " + std::to_string(idx.agent) + ", sample " +
                                std::to_string(idx.sample) + ") out of range");
    }
    NetworkDataset out = base;
    const auto& src = donor.agent(idx.agent);
    out.agents_[idx.agent].set_sample(idx.sample, src.sample(idx.sample), src.true_labels()[idx.sample]);
    return out;
}

void write_dataset_csv(const NetworkDataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "agent,index,y";
    for (std::size_t j = 1; j <= data.dim(); ++j) out << ",x_" << j;
    out << '\n';
    for (std::size_t k = 0; k < data.agents(); ++k) {
        const auto& a = data.agent(k);
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto s = a.sample(i);
            out << k << ',' << i << ',' << s.y;
            for (double v : s.x) out << ',' << format_double(v);
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

NetworkDataset read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path.string());
    std::size_t dim = 0;
    {
        std::stringstream header(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(header, cell, ',')) ++col;
        if (col < 4) throw std::runtime_error("dataset header must have agent,index,y and at least one feature");
        dim = col - 3;
    }
    std::vector<std::vector<double>> features;
    std::vector<std::vector<int>> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string_view> cells;
        std::string_view rest(line);
        while (true) {
            const auto pos = rest.find(',');
            cells.push_back(rest.substr(0, pos));
            if (pos == std::string_view::npos) break;
            rest.remove_prefix(pos + 1);
        }
        if (cells.size() != dim + 3) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected " + std::to_string(dim + 3) +
                                     " columns");
        }
        auto parse_int = [&](std::string_view s) {
            long long v = 0;
            const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
            if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
                throw std::runtime_error("line " + std::to_string(line_no) + ": bad integer '" + std::string(s) + "'");
            }
            return v;
        };
        const auto k = static_cast<std::size_t>(parse_int(cells[0]));
        const auto i = static_cast<std::size_t>(parse_int(cells[1]));
        const int y = static_cast<int>(parse_int(cells[2]));
        if (k >= features.size()) {
            features.resize(k + 1);
            labels.resize(k + 1);
        }
        if (i != labels[k].size()) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": samples must be listed in order");
        }
        labels[k].push_back(y);
        for (std::size_t j = 0; j < dim; ++j) {
            const auto s = cells[3 + j];
            double v = 0.0;
            const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
            if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
                throw std::runtime_error("line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
            }
            features[k].push_back(v);
        }
    }
    std::vector<AgentDataset> shards;
    for (std::size_t k = 0; k < features.size(); ++k) {
        shards.emplace_back(dim, std::move(features[k]), std::move(labels[k]));
    }
    return NetworkDataset(std::move(shards));
}

}  // namespace advdiff
