#include "vcoder/config.hpp"
#include "vcoder/error.hpp"
#include "vcoder/experiments.hpp"
#include "vcoder/kg_store.hpp"
#include "vcoder/linkpred.hpp"
#include "vcoder/trainer.hpp"
#include "vcoder/vcoder.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace vcoder;

namespace {

TripleStore store_from_triples(const std::vector<std::tuple<std::string, std::string, std::string>>& rows,
                               const std::string& incidence) {
    Vocab entities, relations;
    std::vector<Triple> triples;
    triples.reserve(rows.size());
    for (const auto& [h, r, t] : rows) {
        triples.push_back({entities.intern(h), relations.intern(r), entities.intern(t)});
    }
    return TripleStore(std::move(entities), std::move(relations), std::move(triples),
                       incidence_mode_from_string(incidence));
}

py::dict epoch_to_dict(const EpochReport& e) {
    py::dict d;
    d["epoch"] = e.epoch;
    d["global_step"] = e.global_step;
    d["mean_loss"] = e.mean_loss;
    d["epsilon"] = e.epsilon;
    py::list units;
    for (const auto& u : e.units) {
        units.append(py::make_tuple(u.unit, u.count, u.mean, u.variance));
    }
    d["units"] = units;
    return d;
}

} // namespace

PYBIND11_MODULE(_vcoder, m) {
    m.doc() = "Adaptive autoencoder for relation resolution in knowledge graphs";

    py::register_exception<Error>(m, "VCoderError");

    py::class_<Triple>(m, "Triple")
        .def(py::init<EntityId, RelationId, EntityId>(), py::arg("head"), py::arg("relation"), py::arg("tail"))
        .def_readwrite("head", &Triple::head)
        .def_readwrite("relation", &Triple::relation)
        .def_readwrite("tail", &Triple::tail)
        .def("__eq__", [](const Triple& a, const Triple& b) { return a == b; })
        .def("__repr__", [](const Triple& t) {
            return "Triple(" + std::to_string(t.head) + ", " + std::to_string(t.relation) + ", " +
                   std::to_string(t.tail) + ")";
        });

    py::class_<TripleStore>(m, "TripleStore")
        .def_property_readonly("num_entities", &TripleStore::num_entities)
        .def_property_readonly("num_relations", &TripleStore::num_relations)
        .def_property_readonly("num_triples", &TripleStore::num_triples)
        .def_property_readonly("input_width", &TripleStore::input_width)
        .def("triples", [](const TripleStore& s) { return std::vector<Triple>(s.triples().begin(), s.triples().end()); })
        .def("entity_name", [](const TripleStore& s, EntityId id) { return s.entities().name(id); })
        .def("relation_name", [](const TripleStore& s, RelationId id) { return s.relations().name(id); })
        .def("incidence", [](const TripleStore& s, EntityId x) {
            auto span = s.incidence(x);
            return std::vector<std::uint32_t>(span.begin(), span.end());
        });

    m.def("from_triples", &store_from_triples, py::arg("rows"), py::arg("incidence") = "any",
          "Builds a store from (head, relation, tail) name tuples.");
    m.def("load_tsv", [](const std::filesystem::path& p, const std::string& inc) {
        return load_tsv(p, incidence_mode_from_string(inc));
    }, py::arg("path"), py::arg("incidence") = "any");
    m.def("load_id_format", [](const std::filesystem::path& p, const std::string& inc) {
        return load_id_format(p, incidence_mode_from_string(inc));
    }, py::arg("dir"), py::arg("incidence") = "any");
    m.def("binary_encoding", &binary_encoding, py::arg("store"), py::arg("entity"));
    m.def("triple_input", py::overload_cast<const TripleStore&, const Triple&>(&triple_input), py::arg("store"),
          py::arg("triple"));
    m.def("merge_relations", [](const TripleStore& s, RelationId kept, RelationId absorbed) {
        auto r = merge_relations(s, {kept, absorbed});
        return py::make_tuple(std::move(r.store), std::move(r.original));
    }, py::arg("store"), py::arg("kept"), py::arg("absorbed"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("hidden_dim", &TrainConfig::hidden_dim)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("eps_start", &TrainConfig::eps_start)
        .def_readwrite("eps_end", &TrainConfig::eps_end)
        .def_readwrite("eps_decay", &TrainConfig::eps_decay)
        .def_readwrite("epochs_per_round", &TrainConfig::epochs_per_round)
        .def_readwrite("rounds", &TrainConfig::rounds)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("min_samples", &TrainConfig::min_samples)
        .def_readwrite("lp_dim", &TrainConfig::lp_dim)
        .def_readwrite("lp_epochs", &TrainConfig::lp_epochs)
        .def_property("hidden_activation",
                      [](const TrainConfig& c) { return std::string(nn::to_string(c.hidden_activation)); },
                      [](TrainConfig& c, const std::string& v) { c.hidden_activation = nn::activation_from_string(v); })
        .def("to_text", &TrainConfig::to_text);
    m.def("parse_config", &parse_config, py::arg("text"));
    m.def("epsilon_at", &epsilon_at, py::arg("config"), py::arg("t"));

    py::class_<VCoderModel>(m, "VCoderModel")
        .def_property_readonly("units", &VCoderModel::units)
        .def("lineage", [](const VCoderModel& model) {
            std::vector<std::pair<RelationId, std::uint32_t>> out;
            for (const auto& l : model.competitive.lineage()) out.emplace_back(l.origin, l.generation);
            return out;
        })
        .def("encode", [](const VCoderModel& model, const std::vector<double>& x) { return encode(model, x); })
        .def("activations", [](const VCoderModel& model, const std::vector<double>& phi) {
            return model.competitive.activations(phi);
        })
        .def("gate", [](const VCoderModel& model, const std::vector<double>& phi, UnitId j) {
            return model.competitive.gate(phi, j);
        })
        .def("reconstruct", [](const VCoderModel& model, const std::vector<double>& x, UnitId j) {
            auto r = reconstruct(model, x, j);
            return py::make_tuple(std::move(r.z), r.loss);
        })
        .def("route_unsupervised", [](const VCoderModel& model, const std::vector<double>& x) {
            return route_unsupervised(model, x);
        })
        .def("split", [](VCoderModel& model, UnitId j) { return split(model, j); });
    m.def("create_model", [](const TripleStore& store, std::size_t hidden_dim, std::uint64_t seed) {
        return VCoderModel::create(VCoderModel::shape_for(store, hidden_dim), seed);
    }, py::arg("store"), py::arg("hidden_dim") = 32, py::arg("seed") = 42);

    py::class_<Trainer>(m, "Trainer")
        .def(py::init<const TripleStore&, TrainConfig>(), py::arg("store"), py::arg("config"), py::keep_alive<1, 2>())
        .def("run_round", [](Trainer& t) {
            py::list out;
            for (const auto& e : t.run_round()) out.append(epoch_to_dict(e));
            return out;
        })
        .def("run_adaptive", [](Trainer& t) {
            auto report = t.run_adaptive();
            py::list epochs;
            for (const auto& e : report.epochs) epochs.append(epoch_to_dict(e));
            py::list splits;
            for (const auto& s : report.splits) splits.append(py::make_tuple(s.unit, s.twin, s.relation));
            return py::make_tuple(epochs, splits);
        })
        .def("split", [](Trainer& t, UnitId j) { return t.split(j, SplitMode::forced).twin; })
        .def_property_readonly("model", [](const Trainer& t) { return t.model(); })
        .def_property_readonly("epsilon", &Trainer::epsilon)
        .def("save_checkpoint", &Trainer::save_checkpoint);

    m.def("assign_units", [](const VCoderModel& model, const TripleStore& store) {
        return assign_units(model, store, store.triples());
    }, py::arg("model"), py::arg("store"));

    m.def("recovery_experiment", [](const TripleStore& store, RelationId kept, RelationId absorbed,
                                    const TrainConfig& cfg) {
        auto r = recovery_experiment(store, {kept, absorbed}, cfg);
        py::dict d;
        d["accuracy"] = std::vector<double>{r.accuracy[0], r.accuracy[1]};
        d["average"] = r.average;
        d["units"] = std::vector<UnitId>{r.units[0], r.units[1]};
        d["confusion"] = std::vector<std::vector<std::size_t>>{{r.confusion[0][0], r.confusion[0][1]},
                                                               {r.confusion[1][0], r.confusion[1][1]}};
        return d;
    }, py::arg("store"), py::arg("kept"), py::arg("absorbed"), py::arg("config"));

    m.def("disclosure_report", [](const VCoderModel& model, const TripleStore& store, RelationId rel, std::size_t k) {
        auto r = disclosure_report(model, store, rel, k);
        py::list units;
        for (const auto& u : r.units) {
            py::list heads, tails;
            for (const auto& e : u.top_heads) heads.append(py::make_tuple(e.name, e.count));
            for (const auto& e : u.top_tails) tails.append(py::make_tuple(e.name, e.count));
            py::dict d;
            d["unit"] = u.unit;
            d["triples"] = u.triples;
            d["heads"] = heads;
            d["tails"] = tails;
            units.append(d);
        }
        return units;
    }, py::arg("model"), py::arg("store"), py::arg("relation"), py::arg("k") = 5);

    auto lp = m.def_submodule("linkpred", "DistMult link prediction");
    py::class_<linkpred::DistMultModel>(lp, "DistMultModel").def_readonly("dim", &linkpred::DistMultModel::dim);
    py::class_<linkpred::RankingMetrics>(lp, "RankingMetrics")
        .def_readonly("mrr", &linkpred::RankingMetrics::mrr)
        .def_readonly("hits1", &linkpred::RankingMetrics::hits1)
        .def_readonly("hits10", &linkpred::RankingMetrics::hits10)
        .def_readonly("count", &linkpred::RankingMetrics::count);
    lp.def("train", [](const TripleStore& store, std::size_t dim, std::size_t epochs, std::uint64_t seed) {
        linkpred::TrainOptions o;
        o.dim = dim;
        o.epochs = epochs;
        o.seed = seed;
        return linkpred::train(store, o);
    }, py::arg("store"), py::arg("dim") = 50, py::arg("epochs") = 50, py::arg("seed") = 42);
    lp.def("score", &linkpred::score, py::arg("model"), py::arg("triple"));
    lp.def("evaluate_filtered", [](const linkpred::DistMultModel& model, const TripleStore& train,
                                   const std::vector<Triple>& test) {
        Dataset data{train, {}, test};
        return linkpred::evaluate_filtered(model, data, test);
    }, py::arg("model"), py::arg("train"), py::arg("test"));
}
