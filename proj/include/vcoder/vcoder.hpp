#pragma once
// The V-Coder: encoder -> competitive layer with lateral inhibition -> gated
// decoder. Only the winning unit's column of W carries signal (and gradient)
// for a sample; the conditioned loss is the squared reconstruction error
// through that unit.

#include "vcoder/kg_store.hpp"
#include "vcoder/nn.hpp"

#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace vcoder {

struct ModelShape {
    std::size_t input_dim = 0;        // 2 * encoding width
    std::size_t hidden_dim = 32;      // hidden layer of encoder and decoder
    std::size_t fingerprint_dim = 32; // d
    std::size_t num_relations = 0;    // initial unit count
    nn::Activation hidden_activation = nn::Activation::sigmoid;
};

// W is stored column-major: column j (the weights feeding unit j) occupies
// weights[j * d, (j + 1) * d).
class CompetitiveLayer {
public:
    CompetitiveLayer() = default;
    CompetitiveLayer(std::size_t d, std::size_t num_relations);

    std::size_t dim() const { return dim_; }
    std::size_t units() const { return lineage_.size(); }

    std::span<const double> column(UnitId j) const;
    std::span<double> column(UnitId j);
    std::vector<double>& weights() { return weights_; }
    const std::vector<double>& weights() const { return weights_; }

    const Lineage& lineage() const { return lineage_; }
    // Units whose lineage origin is `r`, ascending.
    const std::vector<UnitId>& units_of(RelationId r) const;
    std::size_t num_relations() const { return by_relation_.size(); }

    // Pre-activation W[:,j] . phi for every unit.
    std::vector<double> pre_activations(std::span<const double> phi) const;
    // h_j = sigmoid(W[:,j] . phi) for every unit.
    std::vector<double> activations(std::span<const double> phi) const;
    double activation(std::span<const double> phi, UnitId j) const;
    // v_j = (W[:,j] (.) phi) * h_j.
    std::vector<double> gate(std::span<const double> phi, UnitId j) const;

    // Appends a copy of column j; returns the new unit's id.
    UnitId split(UnitId j);

    // Rebuilds from raw state (checkpoint restore).
    static CompetitiveLayer restore(std::size_t d, std::vector<double> weights, Lineage lineage,
                                    std::size_t num_relations);

private:
    void check_unit(UnitId j) const;
    void check_phi(std::span<const double> phi) const;

    std::size_t dim_ = 0;
    std::vector<double> weights_;
    Lineage lineage_;
    std::vector<std::vector<UnitId>> by_relation_;
};

struct VCoderModel {
    ModelShape shape;
    nn::Network encoder;
    CompetitiveLayer competitive;
    nn::Network decoder;

    // Glorot-initialized model with one unit per relation.
    static VCoderModel create(const ModelShape& shape, std::uint64_t seed);
    // Shape for `store` with the given hidden sizes.
    static ModelShape shape_for(const TripleStore& store, std::size_t hidden_dim,
                                nn::Activation hidden = nn::Activation::sigmoid);

    std::size_t units() const { return competitive.units(); }
};

// Phi for input x.
std::vector<double> encode(const VCoderModel& model, std::span<const double> x);

struct Reconstruction {
    std::vector<double> z;
    double loss = 0.0;
};

// z_j = Dec(v_j) and J(x, z | j) = ||x - z_j||^2.
Reconstruction reconstruct(const VCoderModel& model, std::span<const double> x, UnitId j);
// Conditioned loss through each unit in `units`, reusing one encoder pass.
std::vector<double> conditioned_losses(const VCoderModel& model, std::span<const double> x,
                                       std::span<const UnitId> units);

enum class RoutingMode { forced, argmin, explored };
std::string_view to_string(RoutingMode mode);

struct RoutingDecision {
    UnitId unit = 0;
    RoutingMode mode = RoutingMode::forced;
    std::vector<UnitId> candidates;
    std::vector<double> losses;  // aligned with candidates
    double winner_loss() const;
};

// Supervised routing over the lineage of relation r: a single candidate is
// forced; otherwise with probability epsilon a uniformly drawn candidate
// (explored), else the minimal conditioned loss (argmin, ties to lower id).
RoutingDecision route_supervised(const VCoderModel& model, std::span<const double> x, RelationId r, double epsilon,
                                 std::mt19937_64& rng);

// Winner-take-all over activations, ties to the lowest unit id.
UnitId route_unsupervised(const VCoderModel& model, std::span<const double> x);

// Adds a twin of unit j (column copy, same origin, generation + 1). Encoder,
// decoder and all other columns are untouched.
UnitId split(VCoderModel& model, UnitId j);

// ---- gradients -----------------------------------------------------------

struct ModelGradients {
    nn::Gradients encoder;
    std::vector<double> competitive;  // same layout as W
    nn::Gradients decoder;

    void zero();
    void scale(double s);
};

ModelGradients zero_gradients(const VCoderModel& model);

// Adds the gradient of J(x, z | j) with respect to every parameter into
// `grads` and returns the loss. Only column j of the competitive block is
// written.
double accumulate_gradients(const VCoderModel& model, std::span<const double> x, UnitId j, ModelGradients& grads);

// Central-difference check of accumulate_gradients over every parameter
// (encoder, W, decoder) for J(x, z | j). Returns
// max |analytic - numeric| / max(1, |analytic|); h must lie in [1e-7, 1e-3].
double finite_diff_check(const VCoderModel& model, std::span<const double> x, UnitId j, double h);

// Adam parameter order: encoder (w, b)*, W, decoder (w, b)*.
std::vector<std::span<double>> parameter_blocks(VCoderModel& model);
std::vector<std::span<const double>> gradient_blocks(const ModelGradients& grads);
std::size_t competitive_block_index(const VCoderModel& model);

// ---- per-unit loss statistics -------------------------------------------

// Welford running mean / sample variance per unit.
class UnitLossStats {
public:
    UnitLossStats() = default;
    explicit UnitLossStats(std::size_t units) : entries_(units) {}

    void resize(std::size_t units) { entries_.resize(units); }
    void reset() { std::fill(entries_.begin(), entries_.end(), Entry{}); }
    void add(UnitId unit, double loss);

    std::size_t units() const { return entries_.size(); }
    std::size_t count(UnitId u) const { return entries_.at(u).count; }
    double mean(UnitId u) const { return entries_.at(u).mean; }
    // Unbiased sample variance; 0 below two samples.
    double variance(UnitId u) const;
    double m2(UnitId u) const { return entries_.at(u).m2; }
    std::size_t total() const;

    void set(UnitId u, std::size_t count, double mean, double m2);

private:
    struct Entry {
        std::size_t count = 0;
        double mean = 0.0;
        double m2 = 0.0;
    };
    std::vector<Entry> entries_;
};

// Unit with the highest loss variance among those with at least
// `min_samples` (>= 2) samples; ties to the lower id.
UnitId select_split_candidate(const UnitLossStats& stats, std::size_t min_samples = 10);

// ---- training step -------------------------------------------------------

struct Sample {
    std::span<const double> input;
    RelationId relation = 0;
};

struct StepResult {
    double mean_loss = 0.0;
    std::vector<RoutingDecision> decisions;
};

// Routes every sample, accumulates gradients through each winner's pathway,
// averages over the batch and applies one Adam update. Each sample's winning
// loss (before the update) is added to `stats`.
StepResult train_step(VCoderModel& model, nn::AdamState& optimizer, std::span<const Sample> batch, double epsilon,
                      std::mt19937_64& rng, UnitLossStats& stats);

// Splits unit j in the model and mirrors the optimizer's moments for W so the
// twin starts in the same optimizer state as j.
UnitId split_with_optimizer(VCoderModel& model, nn::AdamState& optimizer, UnitId j);

} // namespace vcoder
