#include "synthetic.hpp"

#include "vcoder/error.hpp"
#include "vcoder/trainer.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace vcoder;
using namespace vcoder::testing;

namespace {

bool same_model(const VCoderModel& a, const VCoderModel& b) {
    if (a.competitive.weights() != b.competitive.weights()) return false;
    if (!(a.competitive.lineage() == b.competitive.lineage())) return false;
    for (std::size_t l = 0; l < a.encoder.size(); ++l) {
        if (a.encoder[l].weights.data != b.encoder[l].weights.data || a.encoder[l].bias != b.encoder[l].bias) return false;
    }
    for (std::size_t l = 0; l < a.decoder.size(); ++l) {
        if (a.decoder[l].weights.data != b.decoder[l].weights.data || a.decoder[l].bias != b.decoder[l].bias) return false;
    }
    return true;
}

} // namespace

TEST_CASE("loss trends down over 20 epochs on a two-relation graph") {
    const auto g = two_signature_graph(1);
    auto cfg = small_config(3);
    Trainer t(g.store, cfg);
    const auto epochs = t.run_round();
    REQUIRE(epochs.size() == 20);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 5; ++i) {
        first += epochs[i].mean_loss;
        last += epochs[15 + i].mean_loss;
    }
    CHECK(last < first);
    CHECK(epochs.back().global_step == 20 * ((g.store.num_triples() + 15) / 16));
    for (const auto& e : epochs) {
        std::size_t routed = 0;
        for (const auto& u : e.units) routed += u.count;
        CHECK(routed == g.store.num_triples());
    }
}

TEST_CASE("splits reset the exploration clock and extend the stats") {
    const auto store = random_store(40, 4, 150, 5);
    auto cfg = small_config(1);
    cfg.epochs_per_round = 2;
    Trainer t(store, cfg);
    t.run_round();
    CHECK(t.epsilon_clock() > 0);
    CHECK(t.epsilon() < cfg.eps_start);
    const auto ev = t.split(2, SplitMode::forced);
    CHECK(ev.twin == 4);
    CHECK(ev.relation == 2);
    CHECK(t.epsilon_clock() == 0);
    CHECK(t.epsilon() == cfg.eps_start);
    CHECK(t.last_epoch_stats().units() == 5);
    CHECK_THROWS_AS(t.split(9, SplitMode::forced), DomainError);
    const auto more = t.run_round();
    CHECK(more.back().units.size() == 5);
}

TEST_CASE("adaptive training splits once per round") {
    const auto store = random_store(40, 3, 150, 6);
    auto cfg = small_config(2);
    cfg.epochs_per_round = 3;
    cfg.rounds = 2;
    Trainer t(store, cfg);
    const auto report = t.run_adaptive();
    CHECK(report.epochs.size() == 9);
    CHECK(report.splits.size() == 2);
    CHECK(t.model().units() == 5);
    CHECK(report.warnings.empty());
    for (const auto& s : report.splits) CHECK(s.mode == SplitMode::variance);
}

TEST_CASE("a window without eligible units stops splitting with a warning") {
    const auto store = random_store(10, 2, 6, 7);
    auto cfg = small_config(2);
    cfg.epochs_per_round = 1;
    cfg.rounds = 3;
    cfg.min_samples = 50;
    Trainer t(store, cfg);
    const auto report = t.run_adaptive();
    CHECK(report.splits.empty());
    CHECK(report.warnings.size() == 1);
    CHECK(report.epochs.size() == 2);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const auto store = random_store(30, 3, 100, 8);
    auto cfg = small_config(9);
    cfg.epochs_per_round = 3;
    cfg.rounds = 1;
    Trainer a(store, cfg), b(store, cfg);
    a.run_adaptive();
    b.run_adaptive();
    CHECK(same_model(a.model(), b.model()));

    cfg.seed = 10;
    Trainer c(store, cfg);
    c.run_adaptive();
    CHECK_FALSE(same_model(a.model(), c.model()));
}

TEST_CASE("checkpoint resume is bit-exact") {
    const auto store = random_store(30, 3, 100, 12);
    auto cfg = small_config(4);
    cfg.epochs_per_round = 2;
    const auto dir = fresh_dir("trainer_ckpt");

    Trainer straight(store, cfg);
    straight.run_round();
    straight.split(1, SplitMode::forced);
    straight.run_round();

    Trainer first(store, cfg);
    first.run_round();
    first.split(1, SplitMode::forced);
    first.save_checkpoint(dir / "ckpt.json");
    auto resumed = Trainer::load_checkpoint(dir / "ckpt.json", store);
    CHECK(resumed.epsilon_clock() == 0);
    CHECK(resumed.epochs_done() == 2);
    resumed.run_round();

    CHECK(same_model(straight.model(), resumed.model()));
    CHECK(straight.global_step() == resumed.global_step());
    for (UnitId u = 0; u < 4; ++u) {
        CHECK(straight.last_epoch_stats().mean(u) == resumed.last_epoch_stats().mean(u));
        CHECK(straight.last_epoch_stats().m2(u) == resumed.last_epoch_stats().m2(u));
    }

    SUBCASE("mismatched dataset") {
        const auto other = random_store(31, 3, 100, 12);
        CHECK_THROWS_AS(Trainer::load_checkpoint(dir / "ckpt.json", other), FormatError);
    }
    SUBCASE("corrupt file") {
        std::ofstream(dir / "bad.json") << "{ not json";
        CHECK_THROWS_AS(Trainer::load_checkpoint(dir / "bad.json", store), FormatError);
        CHECK_THROWS_AS(Trainer::load_checkpoint(dir / "missing.json", store), IoError);
    }
}

TEST_CASE("trainer rejects a model that does not fit the store") {
    const auto store = random_store(20, 3, 40, 1);
    const auto other = random_store(20, 4, 40, 1);
    auto model = VCoderModel::create(VCoderModel::shape_for(other, 4), 1);
    CHECK_THROWS_AS(Trainer(store, small_config(), model), ShapeError);
    auto bad = small_config();
    bad.batch_size = 0;
    CHECK_THROWS_AS(Trainer(store, bad), ConfigError);
}

TEST_CASE("assign_units stays inside each lineage") {
    const auto store = random_store(30, 3, 90, 13);
    auto cfg = small_config(1);
    cfg.epochs_per_round = 2;
    Trainer t(store, cfg);
    t.run_round();
    t.split(0, SplitMode::forced);
    t.run_round();
    const auto units = assign_units(t.model(), store, store.triples());
    REQUIRE(units.size() == store.num_triples());
    for (std::size_t i = 0; i < units.size(); ++i) {
        CHECK(t.model().competitive.lineage()[units[i]].origin == store.triples()[i].relation);
    }
}

TEST_CASE("CSV writers") {
    const auto store = random_store(20, 2, 40, 14);
    auto cfg = small_config(1);
    cfg.epochs_per_round = 1;
    cfg.rounds = 1;
    Trainer t(store, cfg);
    const auto report = t.run_adaptive();

    std::ostringstream epochs, lineage, splits;
    write_epoch_csv(epochs, cfg, report.epochs);
    write_lineage_csv(lineage, cfg, t.model().competitive.lineage(), store.relations());
    write_splits_csv(splits, cfg, report.splits);
    CHECK(epochs.str().rfind("# hidden_dim = 8\n", 0) == 0);
    CHECK(epochs.str().find("\nkind,epoch,global_step,unit,count,mean,variance,epsilon,mean_loss\n") != std::string::npos);
    CHECK(lineage.str().find("\nunit,origin,generation,name\n0,0,0,r0\n") != std::string::npos);
    CHECK(lineage.str().find("#split1") != std::string::npos);
    CHECK(splits.str().find("\nepoch,unit,twin,relation,mode,variance\n1,") != std::string::npos);
}
