#include "vcoder/linkpred.hpp"

#include "vcoder/config.hpp"
#include "vcoder/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace vcoder::linkpred {

double score(const DistMultModel& model, const Triple& t) {
    if (t.head >= model.entities.rows || t.tail >= model.entities.rows || t.relation >= model.relations.rows) {
        throw DomainError("triple references ids outside the embedding tables");
    }
    const auto h = model.entities.row(t.head);
    const auto r = model.relations.row(t.relation);
    const auto e = model.entities.row(t.tail);
    double s = 0.0;
    for (std::size_t i = 0; i < model.dim; ++i) s += h[i] * r[i] * e[i];
    return s;
}

DistMultModel init_model(std::size_t num_entities, std::size_t num_relations, std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw DomainError("embedding dimension must be positive");
    DistMultModel m;
    m.dim = dim;
    m.entities = nn::Matrix(num_entities, dim);
    m.relations = nn::Matrix(num_relations, dim);
    std::mt19937_64 rng(seed);
    const auto fill = [&](nn::Matrix& mat, double limit) {
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (auto& v : mat.data) v = dist(rng);
    };
    // Relation rows use a bound independent of N_r, so appending a relation
    // leaves the existing rows untouched.
    const auto k = static_cast<double>(dim);
    fill(m.entities, std::sqrt(6.0 / (static_cast<double>(num_entities) + k)));
    fill(m.relations, std::sqrt(3.0 / k));
    return m;
}

namespace {

double softplus(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

struct Example {
    Triple triple;
    double label;  // +1 true, -1 corrupted
};

} // namespace

DistMultModel train(const TripleStore& store, const TrainOptions& options) {
    if (store.num_triples() == 0) throw DomainError("cannot train DistMult on an empty store");
    if (options.batch_size == 0 || options.negatives == 0) throw DomainError("batch size and negatives must be positive");
    auto model = init_model(store.num_entities(), store.num_relations(), options.dim, options.seed);

    nn::AdamOptions adam_opts;
    adam_opts.learning_rate = options.learning_rate;
    nn::AdamState adam(adam_opts);

    std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<EntityId> any_entity(0, static_cast<EntityId>(store.num_entities() - 1));
    const auto triples = store.triples();
    std::vector<std::size_t> order(triples.size());
    nn::Matrix grad_e(model.entities.rows, model.dim);
    nn::Matrix grad_r(model.relations.rows, model.dim);
    std::vector<Example> examples;
    const auto k = model.dim;

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const auto stop = std::min(order.size(), start + options.batch_size);
            examples.clear();
            for (std::size_t i = start; i < stop; ++i) {
                const auto& t = triples[order[i]];
                examples.push_back({t, 1.0});
                for (std::size_t n = 0; n < options.negatives; ++n) {
                    examples.push_back({{any_entity(rng), t.relation, t.tail}, -1.0});
                    examples.push_back({{t.head, t.relation, any_entity(rng)}, -1.0});
                }
            }
            std::fill(grad_e.data.begin(), grad_e.data.end(), 0.0);
            std::fill(grad_r.data.begin(), grad_r.data.end(), 0.0);
            const double inv = 1.0 / static_cast<double>(examples.size());
            for (const auto& ex : examples) {
                const double s = score(model, ex.triple);
                if (!std::isfinite(softplus(-ex.label * s))) throw NumericError("non-finite DistMult loss");
                // d softplus(-y s) / ds = -y * sigmoid(-y s)
                const double ds = -ex.label * nn::sigmoid(-ex.label * s) * inv;
                const auto h = model.entities.row(ex.triple.head);
                const auto r = model.relations.row(ex.triple.relation);
                const auto t = model.entities.row(ex.triple.tail);
                auto gh = grad_e.row(ex.triple.head);
                auto gt = grad_e.row(ex.triple.tail);
                auto gr = grad_r.row(ex.triple.relation);
                for (std::size_t i = 0; i < k; ++i) {
                    gh[i] += ds * r[i] * t[i];
                    gt[i] += ds * h[i] * r[i];
                    gr[i] += ds * h[i] * t[i];
                }
            }
            const std::span<double> params[] = {model.entities.data, model.relations.data};
            const std::span<const double> grads[] = {grad_e.data, grad_r.data};
            adam.step(params, grads);
        }
    }
    return model;
}

// ---- ranking -------------------------------------------------------------

std::uint64_t TripleFilter::key(const Triple& t) {
    // 24 bits per entity and 16 bits per relation cover every benchmark.
    return (static_cast<std::uint64_t>(t.head) << 40) | (static_cast<std::uint64_t>(t.relation) << 24) |
           static_cast<std::uint64_t>(t.tail);
}

void TripleFilter::add(std::span<const Triple> triples) {
    for (const auto& t : triples) {
        if (t.head >= (1u << 24) || t.tail >= (1u << 24) || t.relation >= (1u << 16)) {
            throw DomainError("triple ids exceed the filter's key range");
        }
        keys_.insert(key(t));
    }
}

namespace {

template <class MakeCandidate>
double rank_side(const DistMultModel& model, const Triple& truth, EntityId true_entity, const TripleFilter* filter,
                 MakeCandidate make) {
    const double target = score(model, truth);
    std::size_t higher = 0;
    std::size_t ties = 0;
    for (EntityId e = 0; e < model.entities.rows; ++e) {
        if (e == true_entity) continue;
        const Triple cand = make(e);
        if (filter && filter->contains(cand)) continue;
        const double s = score(model, cand);
        if (s > target) ++higher;
        else if (s == target) ++ties;
    }
    return 1.0 + static_cast<double>(higher) + 0.5 * static_cast<double>(ties);
}

} // namespace

double rank_tail(const DistMultModel& model, const Triple& t, const TripleFilter* filter) {
    return rank_side(model, t, t.tail, filter, [&](EntityId e) { return Triple{t.head, t.relation, e}; });
}

double rank_head(const DistMultModel& model, const Triple& t, const TripleFilter* filter) {
    return rank_side(model, t, t.head, filter, [&](EntityId e) { return Triple{e, t.relation, t.tail}; });
}

RankingMetrics evaluate(const DistMultModel& model, std::span<const Triple> test, const TripleFilter* filter) {
    RankingMetrics m;
    double rr = 0.0;
    std::size_t h1 = 0, h10 = 0;
    for (const auto& t : test) {
        for (double rank : {rank_head(model, t, filter), rank_tail(model, t, filter)}) {
            rr += 1.0 / rank;
            if (rank <= 1.0) ++h1;
            if (rank <= 10.0) ++h10;
            ++m.count;
        }
    }
    if (m.count) {
        const double n = static_cast<double>(m.count);
        m.mrr = rr / n;
        m.hits1 = static_cast<double>(h1) / n;
        m.hits10 = static_cast<double>(h10) / n;
    }
    return m;
}

RankingMetrics evaluate_filtered(const DistMultModel& model, const Dataset& data, std::span<const Triple> test) {
    TripleFilter filter;
    filter.add(data.train.triples());
    filter.add(data.valid);
    filter.add(data.test);
    filter.add(test);
    return evaluate(model, test, &filter);
}

void write_metrics_csv(std::ostream& out, const std::string& config_header, const std::string& dataset,
                       const RankingMetrics& m) {
    out << config_header;
    out << "dataset,model,mrr,hits1,hits10,count\n";
    out << csv_field(dataset) << ",DistMult," << format_double(m.mrr) << ',' << format_double(m.hits1) << ','
        << format_double(m.hits10) << ',' << m.count << '\n';
}

} // namespace vcoder::linkpred
