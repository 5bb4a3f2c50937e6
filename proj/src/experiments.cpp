#include "vcoder/experiments.hpp"

#include "vcoder/error.hpp"

#include <algorithm>
#include <map>
#include <ostream>

namespace vcoder {

// ---- recovery ------------------------------------------------------------

Matching best_matching(const std::array<std::array<std::size_t, 2>, 2>& confusion) {
    const auto share = [&](std::size_t r, std::size_t k) {
        const auto total = confusion[r][0] + confusion[r][1];
        return total ? static_cast<double>(confusion[r][k]) / static_cast<double>(total) : 0.0;
    };
    Matching straight{false, {share(0, 0), share(1, 1)}, 0.0};
    straight.average = 0.5 * (straight.accuracy[0] + straight.accuracy[1]);
    Matching crossed{true, {share(0, 1), share(1, 0)}, 0.0};
    crossed.average = 0.5 * (crossed.accuracy[0] + crossed.accuracy[1]);
    return crossed.average > straight.average ? crossed : straight;
}

RecoveryResult recovery_experiment(const TripleStore& store, MergeSpec pair, const TrainConfig& cfg) {
    auto merged = merge_relations(store, pair);
    Trainer trainer(merged.store, cfg);

    RecoveryResult result;
    result.pair = pair;
    result.training = trainer.forced_split_round(pair.kept);
    const auto twin = result.training.splits.back().twin;
    result.units = {pair.kept, twin};

    const auto triples = merged.store.triples();
    const auto& model = trainer.model();
    std::mt19937_64 unused(0);
    std::vector<double> x;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const auto orig = merged.original[i];
        if (orig != pair.kept && orig != pair.absorbed) continue;
        triple_input(merged.store, triples[i], x);
        const auto d = route_supervised(model, x, pair.kept, 0.0, unused);
        const std::size_t r = orig == pair.kept ? 0 : 1;
        const std::size_t k = d.unit == pair.kept ? 0 : 1;
        ++result.confusion[r][k];
    }
    const auto m = best_matching(result.confusion);
    result.accuracy = m.accuracy;
    result.average = m.average;
    result.matched_unit = m.swapped ? std::array<UnitId, 2>{twin, pair.kept} : std::array<UnitId, 2>{pair.kept, twin};
    return result;
}

// ---- loss traces ---------------------------------------------------------

std::vector<RelationTrace> loss_profile(const VCoderModel& model, const TripleStore& store,
                                        std::span<const RelationId> relations) {
    std::map<RelationId, std::size_t> slot;
    std::vector<RelationTrace> traces;
    for (auto r : relations) {
        if (r >= store.num_relations()) throw DomainError("relation " + std::to_string(r) + " out of range");
        if (slot.contains(r)) continue;
        slot.emplace(r, traces.size());
        traces.push_back({r, {}, 0.0, std::nullopt});
    }
    const auto triples = store.triples();
    std::vector<double> x;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        auto it = slot.find(triples[i].relation);
        if (it == slot.end()) continue;
        triple_input(store, triples[i], x);
        const auto& units = model.competitive.units_of(triples[i].relation);
        const auto losses = conditioned_losses(model, x, units);
        const auto best = static_cast<std::size_t>(std::min_element(losses.begin(), losses.end()) - losses.begin());
        traces[it->second].entries.push_back({i, units[best], losses[best]});
    }
    for (auto& t : traces) {
        const auto n = t.entries.size();
        if (n == 0) continue;
        double sum = 0.0;
        for (const auto& e : t.entries) sum += e.loss;
        t.mean = sum / static_cast<double>(n);
        if (n >= 2) {
            double ss = 0.0;
            for (const auto& e : t.entries) ss += (e.loss - t.mean) * (e.loss - t.mean);
            t.variance = ss / static_cast<double>(n - 1);
        }
    }
    return traces;
}

SplitEffect split_effect(const RelationTrace& before, const RelationTrace& after, RelationId relation) {
    if (before.relation != relation || after.relation != relation) {
        throw ComparisonError("traces do not belong to relation " + std::to_string(relation));
    }
    if (before.entries.size() != after.entries.size()) {
        throw ComparisonError("traces cover different numbers of triples");
    }
    for (std::size_t i = 0; i < before.entries.size(); ++i) {
        if (before.entries[i].triple != after.entries[i].triple) {
            throw ComparisonError("traces cover different triples");
        }
    }
    SplitEffect e;
    e.relation = relation;
    e.samples = before.entries.size();
    e.mean_before = before.mean;
    e.mean_after = after.mean;
    e.variance_before = before.variance.value_or(0.0);
    e.variance_after = after.variance.value_or(0.0);
    e.delta_mean = e.mean_after - e.mean_before;
    e.delta_variance = e.variance_after - e.variance_before;
    return e;
}

// ---- disclosure ----------------------------------------------------------

namespace {

std::vector<EntityCount> top_k(const std::map<EntityId, std::size_t>& counts, const Vocab& entities, std::size_t k) {
    std::vector<EntityCount> all;
    all.reserve(counts.size());
    for (const auto& [e, c] : counts) all.push_back({e, entities.name(e), c});
    std::stable_sort(all.begin(), all.end(), [](const EntityCount& a, const EntityCount& b) {
        return a.count != b.count ? a.count > b.count : a.entity < b.entity;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

} // namespace

DisclosureReport disclosure_report(const VCoderModel& model, const TripleStore& store, RelationId relation,
                                   std::size_t k) {
    if (relation >= store.num_relations()) throw DomainError("relation " + std::to_string(relation) + " out of range");
    const auto& units = model.competitive.units_of(relation);
    if (units.size() < 2) {
        throw ReportError("relation " + std::to_string(relation) + " has a single unit: nothing to disclose");
    }
    std::map<UnitId, std::size_t> slot;
    for (std::size_t i = 0; i < units.size(); ++i) slot.emplace(units[i], i);
    std::vector<std::map<EntityId, std::size_t>> heads(units.size()), tails(units.size());
    std::vector<std::size_t> totals(units.size(), 0);

    std::mt19937_64 unused(0);
    std::vector<double> x;
    for (const auto& t : store.triples()) {
        if (t.relation != relation) continue;
        triple_input(store, t, x);
        const auto s = slot.at(route_supervised(model, x, relation, 0.0, unused).unit);
        ++heads[s][t.head];
        ++tails[s][t.tail];
        ++totals[s];
    }
    DisclosureReport report;
    report.relation = relation;
    for (std::size_t i = 0; i < units.size(); ++i) {
        report.units.push_back({units[i], totals[i], top_k(heads[i], store.entities(), k),
                                top_k(tails[i], store.entities(), k)});
    }
    return report;
}

// ---- CSV -----------------------------------------------------------------

void write_recovery_csv(std::ostream& out, const TrainConfig& cfg, const RecoveryResult& r) {
    out << config_header(cfg);
    out << "# units = " << r.units[0] << "," << r.units[1] << "\n";
    out << "pair_kept,pair_absorbed,relation,unit,accuracy,routed_to_unit0,routed_to_unit1\n";
    const RelationId rels[2] = {r.pair.kept, r.pair.absorbed};
    for (std::size_t i = 0; i < 2; ++i) {
        out << r.pair.kept << ',' << r.pair.absorbed << ',' << rels[i] << ',' << r.matched_unit[i] << ','
            << format_double(r.accuracy[i]) << ',' << r.confusion[i][0] << ',' << r.confusion[i][1] << '\n';
    }
    out << r.pair.kept << ',' << r.pair.absorbed << ",avg,," << format_double(r.average) << ",,\n";
}

void write_trace_csv(std::ostream& out, const TrainConfig& cfg, const std::vector<RelationTrace>& traces) {
    out << config_header(cfg);
    out << "relation,triple,unit,loss\n";
    for (const auto& t : traces) {
        for (const auto& e : t.entries) {
            out << t.relation << ',' << e.triple << ',' << e.unit << ',' << format_double(e.loss) << '\n';
        }
    }
}

void write_trace_summary_csv(std::ostream& out, const TrainConfig& cfg, const std::vector<RelationTrace>& traces) {
    out << config_header(cfg);
    out << "relation,samples,mean,variance\n";
    for (const auto& t : traces) {
        out << t.relation << ',' << t.entries.size() << ',' << format_double(t.mean) << ','
            << (t.variance ? format_double(*t.variance) : std::string("NA")) << '\n';
    }
}

void write_split_effect_csv(std::ostream& out, const TrainConfig& cfg, const std::vector<SplitEffect>& effects) {
    out << config_header(cfg);
    out << "relation,samples,mean_before,mean_after,delta_mean,variance_before,variance_after,delta_variance\n";
    for (const auto& e : effects) {
        out << e.relation << ',' << e.samples << ',' << format_double(e.mean_before) << ','
            << format_double(e.mean_after) << ',' << format_double(e.delta_mean) << ','
            << format_double(e.variance_before) << ',' << format_double(e.variance_after) << ','
            << format_double(e.delta_variance) << '\n';
    }
}

void write_disclosure_csv(std::ostream& out, const TrainConfig& cfg, const DisclosureReport& report,
                          const Vocab& relations) {
    out << config_header(cfg);
    out << "# relation_name = " << relations.name(report.relation) << "\n";
    out << "relation,unit,unit_triples,side,rank,entity,count\n";
    for (const auto& u : report.units) {
        const auto rows = [&](const char* side, const std::vector<EntityCount>& list) {
            for (std::size_t i = 0; i < list.size(); ++i) {
                out << report.relation << ',' << u.unit << ',' << u.triples << ',' << side << ',' << i + 1 << ','
                    << csv_field(list[i].name) << ',' << list[i].count << '\n';
            }
        };
        rows("head", u.top_heads);
        rows("tail", u.top_tails);
    }
}

} // namespace vcoder
