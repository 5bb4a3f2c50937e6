#pragma once
// Evaluations on top of a trained V-Coder: merge-and-recover accuracy,
// per-relation loss traces with before/after split comparison, and the
// per-unit head/tail frequency report for a split relation.

#include "vcoder/config.hpp"
#include "vcoder/kg_store.hpp"
#include "vcoder/trainer.hpp"
#include "vcoder/vcoder.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace vcoder {

struct RecoveryResult {
    MergeSpec pair;
    // accuracy[0] for pair.kept, accuracy[1] for pair.absorbed.
    std::array<double, 2> accuracy{0.0, 0.0};
    double average = 0.0;
    // Unit matched to each original relation.
    std::array<UnitId, 2> matched_unit{0, 0};
    // confusion[r][k]: triples of original relation r (0 kept, 1 absorbed)
    // routed to unit k (0 the merged unit, 1 its twin).
    std::array<std::array<std::size_t, 2>, 2> confusion{};
    std::array<UnitId, 2> units{0, 0};
    TrainingReport training;
};

// Accuracy-maximizing matching of two units to two relations from a 2x2
// count table; per-relation accuracy is the share routed to the matched unit.
struct Matching {
    bool swapped = false;  // true: relation 0 -> unit 1, relation 1 -> unit 0
    std::array<double, 2> accuracy{0.0, 0.0};
    double average = 0.0;
};
Matching best_matching(const std::array<std::array<std::size_t, 2>, 2>& confusion);

// merge -> round -> forced split of the merged unit -> round -> route the
// affected triples with epsilon = 0 -> match units to relations.
RecoveryResult recovery_experiment(const TripleStore& store, MergeSpec pair, const TrainConfig& cfg);

struct TraceEntry {
    std::size_t triple = 0;  // index into store.triples()
    UnitId unit = 0;
    double loss = 0.0;
};

struct RelationTrace {
    RelationId relation = 0;
    std::vector<TraceEntry> entries;
    double mean = 0.0;
    // Sample variance; absent below two samples.
    std::optional<double> variance;
};

// Conditioned losses of every triple of each listed relation, routed through
// its lineage with epsilon = 0.
std::vector<RelationTrace> loss_profile(const VCoderModel& model, const TripleStore& store,
                                        std::span<const RelationId> relations);

struct SplitEffect {
    RelationId relation = 0;
    std::size_t samples = 0;
    double mean_before = 0.0;
    double mean_after = 0.0;
    double variance_before = 0.0;
    double variance_after = 0.0;
    double delta_mean = 0.0;
    double delta_variance = 0.0;
};

// Requires both traces to cover the same triples.
SplitEffect split_effect(const RelationTrace& before, const RelationTrace& after, RelationId relation);

struct EntityCount {
    EntityId entity = 0;
    std::string name;
    std::size_t count = 0;
};

struct UnitDisclosure {
    UnitId unit = 0;
    std::size_t triples = 0;
    std::vector<EntityCount> top_heads;
    std::vector<EntityCount> top_tails;
};

struct DisclosureReport {
    RelationId relation = 0;
    std::vector<UnitDisclosure> units;
};

// Top-k head and tail entities per lineage unit of `relation` (count desc,
// entity id asc). Throws ReportError when the relation has a single unit.
DisclosureReport disclosure_report(const VCoderModel& model, const TripleStore& store, RelationId relation,
                                   std::size_t k);

// ---- CSV -----------------------------------------------------------------

// Columns: pair_kept,pair_absorbed,relation,unit,accuracy,routed_to_unit0,routed_to_unit1
// plus one "avg" row.
void write_recovery_csv(std::ostream& out, const TrainConfig& cfg, const RecoveryResult& r);
// Columns: relation,triple,unit,loss (triple indexes store.triples()).
void write_trace_csv(std::ostream& out, const TrainConfig& cfg, const std::vector<RelationTrace>& traces);
// Columns: relation,samples,mean,variance (variance "NA" below two samples).
void write_trace_summary_csv(std::ostream& out, const TrainConfig& cfg, const std::vector<RelationTrace>& traces);
// Columns: relation,samples,mean_before,mean_after,delta_mean,variance_before,variance_after,delta_variance.
void write_split_effect_csv(std::ostream& out, const TrainConfig& cfg, const std::vector<SplitEffect>& effects);
// Columns: relation,unit,unit_triples,side,rank,entity,count.
void write_disclosure_csv(std::ostream& out, const TrainConfig& cfg, const DisclosureReport& report,
                          const Vocab& relations);

} // namespace vcoder
