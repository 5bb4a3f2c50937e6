#pragma once
// DistMult link prediction with filtered ranking metrics.

#include "vcoder/kg_store.hpp"
#include "vcoder/nn.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace vcoder::linkpred {

struct DistMultModel {
    std::size_t dim = 0;
    nn::Matrix entities;   // N_e x k
    nn::Matrix relations;  // N_r x k (diagonal of the interaction matrix)
};

// sum_i e_h[i] * r[i] * e_t[i]
double score(const DistMultModel& model, const Triple& t);

struct TrainOptions {
    std::size_t dim = 50;
    std::size_t epochs = 50;
    std::size_t batch_size = 128;
    double learning_rate = 0.01;
    std::size_t negatives = 1;  // per positive, per side
    std::uint64_t seed = 42;
};

// Glorot-uniform entity embeddings; relation rows are U(-sqrt(3/k), sqrt(3/k)).
DistMultModel init_model(std::size_t num_entities, std::size_t num_relations, std::size_t dim, std::uint64_t seed);

// Softplus logistic loss over each positive and its uniformly corrupted
// heads and tails, optimized with Adam.
DistMultModel train(const TripleStore& store, const TrainOptions& options);

struct RankingMetrics {
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits10 = 0.0;
    std::size_t count = 0;  // ranked queries: two per test triple
};

// Known true triples, used to filter corrupted candidates.
class TripleFilter {
public:
    TripleFilter() = default;
    void add(std::span<const Triple> triples);
    bool contains(const Triple& t) const { return keys_.contains(key(t)); }

private:
    static std::uint64_t key(const Triple& t);
    std::unordered_set<std::uint64_t> keys_;
};

// Rank of the true entity among all N_e candidates on one side:
// 1 + #(strictly higher) + #(ties) / 2, with candidates that form a known
// triple skipped when `filter` is non-null.
double rank_tail(const DistMultModel& model, const Triple& t, const TripleFilter* filter);
double rank_head(const DistMultModel& model, const Triple& t, const TripleFilter* filter);

RankingMetrics evaluate(const DistMultModel& model, std::span<const Triple> test, const TripleFilter* filter);
// Filter = train + valid + test of `data`.
RankingMetrics evaluate_filtered(const DistMultModel& model, const Dataset& data, std::span<const Triple> test);

// One row: dataset,model,mrr,hits1,hits10,count (with a config echo header).
void write_metrics_csv(std::ostream& out, const std::string& config_header, const std::string& dataset,
                       const RankingMetrics& m);

} // namespace vcoder::linkpred
