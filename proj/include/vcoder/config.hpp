#pragma once

#include "vcoder/kg_store.hpp"
#include "vcoder/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace vcoder {

enum class EpsilonFormula {
    standard,  // eps_end + (eps_start - eps_end) * exp(-t * decay)
    literal,   // (eps_start + (eps_end - eps_start)) * exp(-t * decay), as printed
};

// Every tunable of a run. Defaults sit inside the published sweep.
struct TrainConfig {
    std::size_t hidden_dim = 32;
    double learning_rate = 0.001;
    std::size_t batch_size = 32;
    double weight_decay = 0.001;
    double eps_start = 1.0;
    double eps_end = 0.01;
    double eps_decay = 1e-5;
    std::size_t epochs_per_round = 20;
    std::size_t rounds = 0;
    std::uint64_t seed = 42;
    IncidenceMode incidence = IncidenceMode::any;
    EpsilonFormula epsilon_formula = EpsilonFormula::standard;
    std::size_t min_samples = 10;
    nn::Activation hidden_activation = nn::Activation::sigmoid;
    std::size_t top_k = 5;

    // DistMult link prediction.
    std::size_t lp_dim = 50;
    std::size_t lp_epochs = 50;
    std::size_t lp_batch_size = 128;
    double lp_learning_rate = 0.01;
    std::size_t lp_negatives = 1;

    // (key, value) pairs in canonical order, values formatted for round-trip.
    std::vector<std::pair<std::string, std::string>> entries() const;
    // "key = value" lines.
    std::string to_text() const;
};

// Parses "key = value" text ('#' starts a comment). Unknown keys and invalid
// values are collected and reported together in one ConfigError.
TrainConfig parse_config(const std::string& text);
// Reads and validates a config file; an empty file yields all defaults.
TrainConfig validate_config(const std::filesystem::path& path);
// Throws ConfigError listing every violated range.
void check_config(const TrainConfig& cfg);

double epsilon_at(const TrainConfig& cfg, std::uint64_t t);

std::string format_double(double v);
// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& text);

} // namespace vcoder
