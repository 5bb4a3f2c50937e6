#include "vcoder/vcoder.hpp"

#include "vcoder/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vcoder {

// ---- CompetitiveLayer ----------------------------------------------------

CompetitiveLayer::CompetitiveLayer(std::size_t d, std::size_t num_relations)
    : dim_(d), weights_(d * num_relations, 0.0), lineage_(identity_lineage(num_relations)),
      by_relation_(num_relations) {
    for (std::size_t r = 0; r < num_relations; ++r) by_relation_[r].push_back(static_cast<UnitId>(r));
}

CompetitiveLayer CompetitiveLayer::restore(std::size_t d, std::vector<double> weights, Lineage lineage,
                                           std::size_t num_relations) {
    if (weights.size() != d * lineage.size()) throw ShapeError("competitive weights do not match unit count");
    CompetitiveLayer layer;
    layer.dim_ = d;
    layer.weights_ = std::move(weights);
    layer.lineage_ = std::move(lineage);
    layer.by_relation_.assign(num_relations, {});
    for (std::size_t u = 0; u < layer.lineage_.size(); ++u) {
        const auto origin = layer.lineage_[u].origin;
        if (origin >= num_relations) throw LineageError("unit " + std::to_string(u) + " has unknown origin");
        layer.by_relation_[origin].push_back(static_cast<UnitId>(u));
    }
    for (std::size_t r = 0; r < num_relations; ++r) {
        if (layer.by_relation_[r].empty()) throw LineageError("relation " + std::to_string(r) + " has no unit");
    }
    return layer;
}

void CompetitiveLayer::check_unit(UnitId j) const {
    if (j >= units()) {
        throw DomainError("unit " + std::to_string(j) + " out of range (" + std::to_string(units()) + " units)");
    }
}

void CompetitiveLayer::check_phi(std::span<const double> phi) const {
    if (phi.size() != dim_) {
        throw ShapeError("fingerprint has length " + std::to_string(phi.size()) + ", expected " + std::to_string(dim_));
    }
}

std::span<const double> CompetitiveLayer::column(UnitId j) const {
    check_unit(j);
    return std::span<const double>(weights_).subspan(j * dim_, dim_);
}

std::span<double> CompetitiveLayer::column(UnitId j) {
    check_unit(j);
    return std::span<double>(weights_).subspan(j * dim_, dim_);
}

const std::vector<UnitId>& CompetitiveLayer::units_of(RelationId r) const {
    if (r >= by_relation_.size()) throw DomainError("relation " + std::to_string(r) + " out of range");
    return by_relation_[r];
}

std::vector<double> CompetitiveLayer::pre_activations(std::span<const double> phi) const {
    check_phi(phi);
    std::vector<double> out(units(), 0.0);
    for (std::size_t j = 0; j < units(); ++j) {
        const double* w = weights_.data() + j * dim_;
        double acc = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) acc += w[i] * phi[i];
        out[j] = acc;
    }
    return out;
}

std::vector<double> CompetitiveLayer::activations(std::span<const double> phi) const {
    auto out = pre_activations(phi);
    for (auto& v : out) v = nn::sigmoid(v);
    return out;
}

double CompetitiveLayer::activation(std::span<const double> phi, UnitId j) const {
    check_phi(phi);
    const auto w = column(j);
    double acc = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) acc += w[i] * phi[i];
    return nn::sigmoid(acc);
}

std::vector<double> CompetitiveLayer::gate(std::span<const double> phi, UnitId j) const {
    const double h = activation(phi, j);
    const auto w = column(j);
    std::vector<double> v(dim_);
    for (std::size_t i = 0; i < dim_; ++i) v[i] = w[i] * phi[i] * h;
    return v;
}

UnitId CompetitiveLayer::split(UnitId j) {
    check_unit(j);
    const auto fresh = static_cast<UnitId>(units());
    weights_.reserve(weights_.size() + dim_);
    for (std::size_t i = 0; i < dim_; ++i) weights_.push_back(weights_[j * dim_ + i]);
    const auto parent = lineage_[j];
    lineage_.push_back({parent.origin, parent.generation + 1});
    by_relation_[parent.origin].push_back(fresh);
    return fresh;
}

// ---- model ---------------------------------------------------------------

ModelShape VCoderModel::shape_for(const TripleStore& store, std::size_t hidden_dim, nn::Activation hidden) {
    ModelShape s;
    s.input_dim = store.input_width();
    s.hidden_dim = hidden_dim;
    s.fingerprint_dim = hidden_dim;
    s.num_relations = store.num_relations();
    s.hidden_activation = hidden;
    return s;
}

VCoderModel VCoderModel::create(const ModelShape& shape, std::uint64_t seed) {
    if (shape.input_dim == 0 || shape.hidden_dim == 0 || shape.fingerprint_dim == 0 || shape.num_relations == 0) {
        throw ShapeError("model dimensions must be positive");
    }
    std::mt19937_64 rng(seed);
    VCoderModel m;
    m.shape = shape;
    const auto act = shape.hidden_activation;
    m.encoder.push_back(nn::make_layer(shape.input_dim, shape.hidden_dim, act, rng));
    m.encoder.push_back(nn::make_layer(shape.hidden_dim, shape.fingerprint_dim, act, rng));
    m.competitive = CompetitiveLayer(shape.fingerprint_dim, shape.num_relations);
    const double limit = std::sqrt(6.0 / static_cast<double>(shape.fingerprint_dim + shape.num_relations));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& w : m.competitive.weights()) w = dist(rng);
    m.decoder.push_back(nn::make_layer(shape.fingerprint_dim, shape.hidden_dim, act, rng));
    m.decoder.push_back(nn::make_layer(shape.hidden_dim, shape.input_dim, nn::Activation::sigmoid, rng));
    return m;
}

std::vector<double> encode(const VCoderModel& model, std::span<const double> x) {
    if (x.size() != model.shape.input_dim) {
        throw ShapeError("input has length " + std::to_string(x.size()) + ", expected " +
                         std::to_string(model.shape.input_dim));
    }
    return nn::forward(model.encoder, x);
}

namespace {

double checked_loss(std::span<const double> x, std::span<const double> z, UnitId j) {
    const double loss = nn::squared_error(x, z);
    if (!std::isfinite(loss)) throw NumericError("non-finite reconstruction loss through unit " + std::to_string(j));
    return loss;
}

} // namespace

Reconstruction reconstruct(const VCoderModel& model, std::span<const double> x, UnitId j) {
    const auto phi = encode(model, x);
    Reconstruction r;
    r.z = nn::forward(model.decoder, model.competitive.gate(phi, j));
    r.loss = checked_loss(x, r.z, j);
    return r;
}

std::vector<double> conditioned_losses(const VCoderModel& model, std::span<const double> x,
                                       std::span<const UnitId> units) {
    const auto phi = encode(model, x);
    std::vector<double> out;
    out.reserve(units.size());
    for (auto j : units) {
        const auto z = nn::forward(model.decoder, model.competitive.gate(phi, j));
        out.push_back(checked_loss(x, z, j));
    }
    return out;
}

std::string_view to_string(RoutingMode mode) {
    switch (mode) {
    case RoutingMode::forced: return "forced";
    case RoutingMode::argmin: return "argmin";
    case RoutingMode::explored: return "explored";
    }
    return "forced";
}

double RoutingDecision::winner_loss() const {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i] == unit) return losses.at(i);
    }
    throw LineageError("routing decision does not contain its winner");
}

namespace {

RoutingDecision route(const VCoderModel& model, std::span<const double> x, RelationId r, double epsilon,
                      std::mt19937_64& rng, bool evaluate_forced) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("epsilon must lie in [0, 1]");
    const auto& candidates = model.competitive.units_of(r);
    if (candidates.empty()) throw LineageError("relation " + std::to_string(r) + " has no competitive unit");
    RoutingDecision d;
    d.candidates = candidates;
    if (candidates.size() == 1) {
        d.unit = candidates.front();
        d.mode = RoutingMode::forced;
        if (evaluate_forced) d.losses = conditioned_losses(model, x, candidates);
        return d;
    }
    d.losses = conditioned_losses(model, x, candidates);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        d.unit = candidates[pick(rng)];
        d.mode = RoutingMode::explored;
    } else {
        const auto best = std::min_element(d.losses.begin(), d.losses.end()) - d.losses.begin();
        d.unit = candidates[static_cast<std::size_t>(best)];
        d.mode = RoutingMode::argmin;
    }
    return d;
}

} // namespace

RoutingDecision route_supervised(const VCoderModel& model, std::span<const double> x, RelationId r, double epsilon,
                                 std::mt19937_64& rng) {
    return route(model, x, r, epsilon, rng, true);
}

UnitId route_unsupervised(const VCoderModel& model, std::span<const double> x) {
    const auto h = model.competitive.activations(encode(model, x));
    return static_cast<UnitId>(std::max_element(h.begin(), h.end()) - h.begin());
}

UnitId split(VCoderModel& model, UnitId j) {
    return model.competitive.split(j);
}

// ---- gradients -----------------------------------------------------------

namespace {

void zero_net(nn::Gradients& g) {
    for (auto& l : g.layers) {
        std::fill(l.weights.data.begin(), l.weights.data.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    std::fill(g.input.begin(), g.input.end(), 0.0);
}

void scale_net(nn::Gradients& g, double s) {
    for (auto& l : g.layers) {
        for (auto& v : l.weights.data) v *= s;
        for (auto& v : l.bias) v *= s;
    }
}

} // namespace

void ModelGradients::zero() {
    zero_net(encoder);
    zero_net(decoder);
    std::fill(competitive.begin(), competitive.end(), 0.0);
}

void ModelGradients::scale(double s) {
    scale_net(encoder, s);
    scale_net(decoder, s);
    for (auto& v : competitive) v *= s;
}

ModelGradients zero_gradients(const VCoderModel& model) {
    ModelGradients g;
    g.encoder = nn::zero_gradients(model.encoder);
    g.decoder = nn::zero_gradients(model.decoder);
    g.competitive.assign(model.competitive.weights().size(), 0.0);
    return g;
}

double accumulate_gradients(const VCoderModel& model, std::span<const double> x, UnitId j, ModelGradients& grads) {
    if (x.size() != model.shape.input_dim) throw ShapeError("input length does not match the model");
    if (grads.competitive.size() != model.competitive.weights().size()) {
        throw ShapeError("gradient buffer for W is stale (model was split)");
    }
    const auto enc = nn::forward_trace(model.encoder, x);
    const auto phi = enc.output();
    const auto col = model.competitive.column(j);
    const auto d = col.size();

    double pre = 0.0;
    for (std::size_t i = 0; i < d; ++i) pre += col[i] * phi[i];
    const double h = nn::sigmoid(pre);
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = col[i] * phi[i] * h;

    const auto dec = nn::forward_trace(model.decoder, v);
    const auto z = dec.output();
    const double loss = checked_loss(x, z, j);

    std::vector<double> dz(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) dz[k] = 2.0 * (z[k] - x[k]);
    const auto dv = nn::backpropagate(model.decoder, dec, dz, grads.decoder);

    // v_i = w_i phi_i h with h = sigmoid(w . phi): product rule through both factors.
    double dh = 0.0;
    for (std::size_t i = 0; i < d; ++i) dh += dv[i] * col[i] * phi[i];
    const double dpre = dh * h * (1.0 - h);
    double* gw = grads.competitive.data() + static_cast<std::size_t>(j) * d;
    std::vector<double> dphi(d);
    for (std::size_t i = 0; i < d; ++i) {
        gw[i] += dv[i] * phi[i] * h + dpre * phi[i];
        dphi[i] = dv[i] * col[i] * h + dpre * col[i];
    }
    nn::backpropagate(model.encoder, enc, dphi, grads.encoder);
    return loss;
}

double finite_diff_check(const VCoderModel& model, std::span<const double> x, UnitId j, double h) {
    if (!(h >= 1e-7 && h <= 1e-3)) throw DomainError("finite-difference step must lie in [1e-7, 1e-3]");
    auto grads = zero_gradients(model);
    accumulate_gradients(model, x, j, grads);
    VCoderModel probe = model;
    const auto params = parameter_blocks(probe);
    const auto analytic = gradient_blocks(grads);
    double worst = 0.0;
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t k = 0; k < params[b].size(); ++k) {
            double& p = params[b][k];
            const double saved = p;
            p = saved + h;
            const double up = reconstruct(probe, x, j).loss;
            p = saved - h;
            const double down = reconstruct(probe, x, j).loss;
            p = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[b][k];
            worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
        }
    }
    return worst;
}

std::vector<std::span<double>> parameter_blocks(VCoderModel& model) {
    auto out = nn::parameter_blocks(model.encoder);
    out.emplace_back(model.competitive.weights());
    auto dec = nn::parameter_blocks(model.decoder);
    out.insert(out.end(), dec.begin(), dec.end());
    return out;
}

std::vector<std::span<const double>> gradient_blocks(const ModelGradients& grads) {
    auto out = nn::gradient_blocks(grads.encoder);
    out.emplace_back(grads.competitive);
    auto dec = nn::gradient_blocks(grads.decoder);
    out.insert(out.end(), dec.begin(), dec.end());
    return out;
}

std::size_t competitive_block_index(const VCoderModel& model) {
    return 2 * model.encoder.size();
}

// ---- UnitLossStats -------------------------------------------------------

void UnitLossStats::add(UnitId unit, double loss) {
    if (unit >= entries_.size()) entries_.resize(unit + 1);
    auto& e = entries_[unit];
    ++e.count;
    const double delta = loss - e.mean;
    e.mean += delta / static_cast<double>(e.count);
    e.m2 += delta * (loss - e.mean);
}

double UnitLossStats::variance(UnitId u) const {
    const auto& e = entries_.at(u);
    if (e.count < 2) return 0.0;
    return std::max(0.0, e.m2 / static_cast<double>(e.count - 1));
}

std::size_t UnitLossStats::total() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.count;
    return n;
}

void UnitLossStats::set(UnitId u, std::size_t count, double mean, double m2) {
    if (u >= entries_.size()) entries_.resize(u + 1);
    entries_[u] = {count, mean, m2};
}

UnitId select_split_candidate(const UnitLossStats& stats, std::size_t min_samples) {
    const std::size_t floor = std::max<std::size_t>(min_samples, 2);
    bool found = false;
    UnitId best = 0;
    double best_var = 0.0;
    for (std::size_t u = 0; u < stats.units(); ++u) {
        const auto unit = static_cast<UnitId>(u);
        if (stats.count(unit) < floor) continue;
        const double var = stats.variance(unit);
        if (!found || var > best_var) {
            found = true;
            best = unit;
            best_var = var;
        }
    }
    if (!found) {
        throw SelectionError("no unit has at least " + std::to_string(floor) + " samples in the last window");
    }
    return best;
}

// ---- training step -------------------------------------------------------

StepResult train_step(VCoderModel& model, nn::AdamState& optimizer, std::span<const Sample> batch, double epsilon,
                      std::mt19937_64& rng, UnitLossStats& stats) {
    if (batch.empty()) throw DomainError("train_step needs a non-empty batch");
    if (stats.units() < model.units()) stats.resize(model.units());
    auto grads = zero_gradients(model);
    StepResult result;
    result.decisions.reserve(batch.size());
    double total = 0.0;
    for (const auto& sample : batch) {
        auto decision = route(model, sample.input, sample.relation, epsilon, rng, false);
        const double loss = accumulate_gradients(model, sample.input, decision.unit, grads);
        if (decision.losses.empty()) decision.losses.push_back(loss);
        stats.add(decision.unit, loss);
        total += loss;
        result.decisions.push_back(std::move(decision));
    }
    const double n = static_cast<double>(batch.size());
    result.mean_loss = total / n;
    grads.scale(1.0 / n);
    auto params = parameter_blocks(model);
    auto g = gradient_blocks(grads);
    optimizer.step(params, g);
    for (auto p : params) {
        for (double v : p) {
            if (!std::isfinite(v)) throw NumericError("non-finite parameter after optimizer step");
        }
    }
    return result;
}

UnitId split_with_optimizer(VCoderModel& model, nn::AdamState& optimizer, UnitId j) {
    const auto d = model.competitive.dim();
    const auto fresh = split(model, j);
    optimizer.extend_block(competitive_block_index(model), static_cast<std::size_t>(j) * d, d);
    return fresh;
}

} // namespace vcoder
