#include "synthetic.hpp"

#include "vcoder/error.hpp"
#include "vcoder/linkpred.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace vcoder;
using namespace vcoder::linkpred;
using namespace vcoder::testing;

namespace {

// Exhaustive oracle: enumerate every corruption, filter by a linear scan of
// the known triples, and count strictly-better and tied scores.
struct Brute {
    double mrr = 0, hits1 = 0, hits10 = 0;
};

double brute_score(const DistMultModel& m, EntityId h, RelationId r, EntityId t) {
    double s = 0;
    for (std::size_t i = 0; i < m.dim; ++i) s += m.entities(h, i) * m.relations(r, i) * m.entities(t, i);
    return s;
}

Brute brute_metrics(const DistMultModel& m, const std::vector<Triple>& known, const std::vector<Triple>& test,
                    bool filtered) {
    const auto is_known = [&](EntityId h, RelationId r, EntityId t) {
        return std::find(known.begin(), known.end(), Triple{h, r, t}) != known.end();
    };
    Brute b;
    double n = 0;
    for (const auto& q : test) {
        for (int side = 0; side < 2; ++side) {
            const double truth = brute_score(m, q.head, q.relation, q.tail);
            double higher = 0, ties = 0;
            for (EntityId e = 0; e < m.entities.rows; ++e) {
                const EntityId h = side == 0 ? e : q.head;
                const EntityId t = side == 0 ? q.tail : e;
                if ((side == 0 && e == q.head) || (side == 1 && e == q.tail)) continue;
                if (filtered && is_known(h, q.relation, t)) continue;
                const double s = brute_score(m, h, q.relation, t);
                if (s > truth) higher += 1;
                if (s == truth) ties += 1;
            }
            const double rank = 1 + higher + ties / 2;
            b.mrr += 1 / rank;
            b.hits1 += rank <= 1 ? 1 : 0;
            b.hits10 += rank <= 10 ? 1 : 0;
            n += 1;
        }
    }
    b.mrr /= n;
    b.hits1 /= n;
    b.hits10 /= n;
    return b;
}

// Eight entities, two relations; small integer embeddings so several
// candidates tie exactly.
DistMultModel handcrafted() {
    DistMultModel m;
    m.dim = 2;
    m.entities = nn::Matrix(8, 2);
    m.entities.data = {1, 0, 0, 1, 1, 1, 2, 0, 0, 2, 1, -1, -1, 1, 1, 0};
    m.relations = nn::Matrix(2, 2);
    m.relations.data = {1, 1, 2, -1};
    return m;
}

} // namespace

TEST_CASE("filtered metrics on a handcrafted graph equal exhaustive enumeration") {
    const auto m = handcrafted();
    const std::vector<Triple> train{{0, 0, 2}, {2, 0, 3}, {1, 1, 4}, {3, 1, 5}, {7, 0, 0}, {4, 0, 6}};
    const std::vector<Triple> test{{0, 0, 3}, {2, 1, 5}, {6, 0, 7}, {1, 0, 4}};
    std::vector<Triple> known = train;
    known.insert(known.end(), test.begin(), test.end());

    TripleFilter filter;
    filter.add(known);
    const auto got = evaluate(m, test, &filter);
    const auto expect = brute_metrics(m, known, test, true);
    CHECK(got.count == 2 * test.size());
    CHECK(got.mrr == expect.mrr);
    CHECK(got.hits1 == expect.hits1);
    CHECK(got.hits10 == expect.hits10);

    const auto raw = evaluate(m, test, nullptr);
    const auto raw_expect = brute_metrics(m, known, test, false);
    CHECK(raw.mrr == raw_expect.mrr);
    CHECK(raw.hits1 == raw_expect.hits1);

    // Dataset wrapper filters on train + test.
    Vocab ev, rv;
    for (int i = 0; i < 8; ++i) ev.intern("e" + std::to_string(i));
    rv.intern("p");
    rv.intern("q");
    Dataset d{TripleStore(ev, rv, train), {}, test};
    const auto wrapped = evaluate_filtered(m, d, test);
    CHECK(wrapped.mrr == expect.mrr);
}

TEST_CASE("tie handling gives the mean rank among ties") {
    DistMultModel m;
    m.dim = 1;
    m.entities = nn::Matrix(4, 1, 1.0);  // every candidate scores the same
    m.relations = nn::Matrix(1, 1, 1.0);
    const Triple t{0, 0, 1};
    // Three other candidates, all tied: 1 + 3 / 2.
    CHECK(rank_tail(m, t, nullptr) == 2.5);
    CHECK(rank_head(m, t, nullptr) == 2.5);
    TripleFilter f;
    const std::vector<Triple> known{{0, 0, 2}};
    f.add(known);
    CHECK(rank_tail(m, t, &f) == 2.0);
}

TEST_CASE("ranking invariants on a trained model") {
    const auto store = random_store(25, 3, 150, 17);
    TrainOptions o;
    o.dim = 8;
    o.epochs = 30;
    o.batch_size = 32;
    o.seed = 3;
    const auto m = train(store, o);
    std::vector<Triple> test(store.triples().begin(), store.triples().begin() + 20);
    TripleFilter filter;
    filter.add(store.triples());
    const auto f = evaluate(m, test, &filter);
    const auto raw = evaluate(m, test, nullptr);
    for (const auto& t : test) {
        CHECK(rank_tail(m, t, &filter) <= rank_tail(m, t, nullptr));
        CHECK(rank_head(m, t, &filter) <= rank_head(m, t, nullptr));
    }
    CHECK(f.mrr >= raw.mrr);
    CHECK(f.hits1 <= f.hits10);
    CHECK(f.mrr >= 1.0 / static_cast<double>(store.num_entities()));
    CHECK(f.mrr <= 1.0);

    // Training should beat the untrained initialization on the train triples.
    const auto init = init_model(store.num_entities(), store.num_relations(), 8, 3);
    CHECK(f.mrr > evaluate(init, test, &filter).mrr);
}

TEST_CASE("an unused extra relation leaves training and metrics unchanged") {
    const auto store = random_store(20, 3, 80, 19);
    Vocab rels = store.relations();
    rels.intern("r0#split1");
    const TripleStore wider(store.entities(), rels, std::vector<Triple>(store.triples().begin(), store.triples().end()));
    TrainOptions o;
    o.dim = 6;
    o.epochs = 5;
    const auto a = train(store, o);
    const auto b = train(wider, o);
    CHECK(a.entities.data == b.entities.data);
    const std::vector<Triple> test(store.triples().begin(), store.triples().begin() + 10);
    const auto ma = evaluate_filtered(a, Dataset{store, {}, test}, test);
    const auto mb = evaluate_filtered(b, Dataset{wider, {}, test}, test);
    CHECK(ma.mrr == mb.mrr);
    CHECK(ma.hits10 == mb.hits10);
}

TEST_CASE("training is seeded and rejects bad options") {
    const auto store = random_store(15, 2, 40, 20);
    TrainOptions o;
    o.dim = 4;
    o.epochs = 3;
    CHECK(train(store, o).entities.data == train(store, o).entities.data);
    o.negatives = 0;
    CHECK_THROWS_AS(train(store, o), DomainError);
    CHECK_THROWS_AS(init_model(3, 1, 0, 1), DomainError);
    const auto m = init_model(3, 1, 2, 1);
    CHECK_THROWS_AS(score(m, Triple{5, 0, 0}), DomainError);
}

TEST_CASE("metrics CSV") {
    RankingMetrics m{0.5, 0.25, 0.75, 8};
    std::ostringstream out;
    write_metrics_csv(out, "# seed = 1\n", "toy", m);
    CHECK(out.str() == "# seed = 1\ndataset,model,mrr,hits1,hits10,count\ntoy,DistMult,0.5,0.25,0.75,8\n");
}
