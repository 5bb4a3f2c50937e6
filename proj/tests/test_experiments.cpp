#include "synthetic.hpp"

#include "vcoder/error.hpp"
#include "vcoder/experiments.hpp"

#include <doctest.h>

#include <map>
#include <sstream>

using namespace vcoder;
using namespace vcoder::testing;

TEST_CASE("best matching picks the higher average accuracy") {
    // Straight: (8/10 + 9/10) / 2 = 0.85.
    auto m = best_matching({{{8, 2}, {1, 9}}});
    CHECK_FALSE(m.swapped);
    CHECK(m.average == doctest::Approx(0.85));
    CHECK(m.accuracy[0] == doctest::Approx(0.8));
    // Crossed: (7/10 + 6/6) / 2 = 0.85 vs straight (3/10 + 0/6) / 2 = 0.15.
    m = best_matching({{{3, 7}, {6, 0}}});
    CHECK(m.swapped);
    CHECK(m.accuracy[0] == doctest::Approx(0.7));
    CHECK(m.accuracy[1] == doctest::Approx(1.0));
    // Everything in one unit: either matching scores 0.5.
    m = best_matching({{{5, 0}, {5, 0}}});
    CHECK(m.average == doctest::Approx(0.5));
}

TEST_CASE("recovery separates relations with disjoint signatures") {
    const auto g = two_signature_graph(2);
    const auto r = recovery_experiment(g.store, {g.r0, g.r1}, small_config(1));
    CHECK(r.units[0] == g.r0);
    CHECK(r.units[1] == g.store.num_relations());
    const auto counts = g.store.relation_counts();
    CHECK(r.confusion[0][0] + r.confusion[0][1] == counts[g.r0]);
    CHECK(r.confusion[1][0] + r.confusion[1][1] == counts[g.r1]);
    CHECK(r.average >= 0.9);
    CHECK(r.training.splits.size() == 1);
    CHECK(r.training.splits[0].mode == SplitMode::forced);

    std::ostringstream csv;
    write_recovery_csv(csv, small_config(1), r);
    CHECK(csv.str().find("pair_kept,pair_absorbed,relation,unit,accuracy,routed_to_unit0,routed_to_unit1\n") !=
          std::string::npos);
    CHECK(csv.str().find(",avg,,") != std::string::npos);
    CHECK_THROWS_AS(recovery_experiment(g.store, {g.r0, g.r0}, small_config(1)), SpecError);
}

TEST_CASE("loss profile and split effect") {
    const auto store = random_store(30, 3, 120, 3);
    auto cfg = small_config(2);
    cfg.epochs_per_round = 3;
    Trainer t(store, cfg);
    t.run_round();
    const std::vector<RelationId> rels{1, 2, 1};
    const auto before = loss_profile(t.model(), store, rels);
    REQUIRE(before.size() == 2);  // duplicates collapse
    const auto counts = store.relation_counts();
    CHECK(before[0].entries.size() == counts[1]);
    double sum = 0.0;
    for (const auto& e : before[0].entries) {
        CHECK(e.loss == reconstruct(t.model(), triple_input(store, store.triples()[e.triple]), e.unit).loss);
        sum += e.loss;
    }
    CHECK(before[0].mean == doctest::Approx(sum / static_cast<double>(counts[1])));
    REQUIRE(before[0].variance.has_value());

    t.split(1, SplitMode::forced);
    t.run_round();
    const auto after = loss_profile(t.model(), store, rels);
    const auto effect = split_effect(before[0], after[0], 1);
    CHECK(effect.samples == counts[1]);
    CHECK(effect.delta_mean == doctest::Approx(after[0].mean - before[0].mean));
    CHECK_THROWS_AS(split_effect(before[0], after[1], 1), ComparisonError);
    CHECK_THROWS_AS(loss_profile(t.model(), store, std::vector<RelationId>{7}), DomainError);

    std::ostringstream summary;
    write_trace_summary_csv(summary, cfg, before);
    CHECK(summary.str().find("relation,samples,mean,variance\n1,") != std::string::npos);
}

TEST_CASE("trace summary marks single-sample variance as NA") {
    RelationTrace t{4, {{0, 4, 0.5}}, 0.5, std::nullopt};
    std::ostringstream out;
    write_trace_summary_csv(out, TrainConfig{}, {t});
    CHECK(out.str().find("\n4,1,0.5,NA\n") != std::string::npos);
}

TEST_CASE("disclosure counts agree with brute force") {
    const auto store = random_store(15, 2, 80, 4);
    auto cfg = small_config(3);
    cfg.epochs_per_round = 2;
    Trainer t(store, cfg);
    t.run_round();
    CHECK_THROWS_AS(disclosure_report(t.model(), store, 0, 3), ReportError);
    t.split(0, SplitMode::forced);
    for (auto& w : t.model().competitive.column(2)) w = -w;  // make the twin differ
    const auto report = disclosure_report(t.model(), store, 0, 3);
    REQUIRE(report.units.size() == 2);

    const auto assign = assign_units(t.model(), store, store.triples());
    std::map<UnitId, std::map<EntityId, std::size_t>> heads;
    std::map<UnitId, std::size_t> totals;
    for (std::size_t i = 0; i < assign.size(); ++i) {
        if (store.triples()[i].relation != 0) continue;
        ++heads[assign[i]][store.triples()[i].head];
        ++totals[assign[i]];
    }
    for (const auto& u : report.units) {
        CHECK(u.triples == totals[u.unit]);
        CHECK(u.top_heads.size() <= 3);
        for (std::size_t i = 0; i < u.top_heads.size(); ++i) {
            CHECK(u.top_heads[i].count == heads[u.unit][u.top_heads[i].entity]);
            if (i > 0) {
                const auto& a = u.top_heads[i - 1];
                const auto& b = u.top_heads[i];
                CHECK((a.count > b.count || (a.count == b.count && a.entity < b.entity)));
            }
        }
    }
    std::ostringstream csv;
    write_disclosure_csv(csv, cfg, report, store.relations());
    CHECK(csv.str().find("relation,unit,unit_triples,side,rank,entity,count\n") != std::string::npos);
}
