#include "vcoder/trainer.hpp"

#include "vcoder/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace vcoder {

namespace {

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

constexpr std::uint32_t shuffle_stream = 1;
constexpr std::uint32_t explore_stream = 2;

nn::AdamOptions adam_options(const TrainConfig& cfg) {
    nn::AdamOptions o;
    o.learning_rate = cfg.learning_rate;
    o.weight_decay = cfg.weight_decay;
    return o;
}

} // namespace

Trainer::Trainer(const TripleStore& store, TrainConfig cfg)
    : Trainer(store, cfg,
              VCoderModel::create(VCoderModel::shape_for(store, cfg.hidden_dim, cfg.hidden_activation), cfg.seed)) {}

Trainer::Trainer(const TripleStore& store, TrainConfig cfg, VCoderModel model)
    : store_(&store), cfg_(std::move(cfg)), model_(std::move(model)), optimizer_(adam_options(cfg_)),
      shuffle_rng_(stream_rng(cfg_.seed, shuffle_stream)), explore_rng_(stream_rng(cfg_.seed, explore_stream)),
      last_stats_(model_.units()) {
    check_config(cfg_);
    check_store();
}

void Trainer::check_store() const {
    if (model_.shape.input_dim != store_->input_width() ||
        model_.competitive.num_relations() != store_->num_relations()) {
        throw ShapeError("model dimensions do not match the dataset (input " + std::to_string(model_.shape.input_dim) +
                         " vs " + std::to_string(store_->input_width()) + ")");
    }
}

EpochReport Trainer::run_epoch() {
    const auto triples = store_->triples();
    const auto n = triples.size();
    if (order_.size() != n) {
        order_.resize(n);
    }
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), shuffle_rng_);

    UnitLossStats stats(model_.units());
    const auto bs = cfg_.batch_size;
    std::vector<std::vector<double>> inputs(std::min(bs, n));
    std::vector<Sample> batch;
    batch.reserve(inputs.size());
    double total = 0.0;

    for (std::size_t start = 0; start < n; start += bs) {
        const auto stop = std::min(n, start + bs);
        batch.clear();
        for (std::size_t k = start; k < stop; ++k) {
            const auto& t = triples[order_[k]];
            auto& x = inputs[k - start];
            triple_input(*store_, t, x);
            batch.push_back({x, t.relation});
        }
        const double eps = epsilon();
        auto step = train_step(model_, optimizer_, batch, eps, explore_rng_, stats);
        total += step.mean_loss * static_cast<double>(batch.size());
        ++global_step_;
        ++eps_clock_;
    }

    EpochReport report;
    report.epoch = epoch_;
    report.global_step = global_step_;
    report.samples = n;
    report.mean_loss = n ? total / static_cast<double>(n) : 0.0;
    report.epsilon = epsilon();
    for (std::size_t u = 0; u < model_.units(); ++u) {
        const auto unit = static_cast<UnitId>(u);
        report.units.push_back({unit, stats.count(unit), stats.mean(unit), stats.variance(unit)});
    }
    last_stats_ = std::move(stats);
    ++epoch_;
    return report;
}

std::vector<EpochReport> Trainer::run_epochs(std::size_t epochs) {
    std::vector<EpochReport> out;
    out.reserve(epochs);
    for (std::size_t e = 0; e < epochs; ++e) {
        // Last good state, restored if the epoch hits a numeric failure.
        VCoderModel model_snapshot = model_;
        nn::AdamState opt_snapshot = optimizer_;
        try {
            out.push_back(run_epoch());
        } catch (const NumericError& err) {
            model_ = std::move(model_snapshot);
            optimizer_ = std::move(opt_snapshot);
            throw NumericError(std::string(err.what()) + " (epoch " + std::to_string(epoch_) + ", step " +
                               std::to_string(global_step_) + "; model restored to the start of the epoch)");
        }
    }
    return out;
}

std::vector<EpochReport> Trainer::run_round() {
    return run_epochs(cfg_.epochs_per_round);
}

SplitEvent Trainer::split(UnitId j, SplitMode mode) {
    if (j >= model_.units()) throw DomainError("cannot split unknown unit " + std::to_string(j));
    SplitEvent ev;
    ev.epoch = epoch_;
    ev.unit = j;
    ev.relation = model_.competitive.lineage()[j].origin;
    ev.mode = mode;
    ev.variance = j < last_stats_.units() ? last_stats_.variance(j) : 0.0;
    ev.twin = split_with_optimizer(model_, optimizer_, j);
    last_stats_.resize(model_.units());
    eps_clock_ = 0;
    return ev;
}

TrainingReport Trainer::run_adaptive() {
    TrainingReport report;
    for (std::size_t r = 0; r < cfg_.rounds; ++r) {
        auto epochs = run_round();
        report.epochs.insert(report.epochs.end(), epochs.begin(), epochs.end());
        UnitId target = 0;
        try {
            target = select_split_candidate(last_stats_, cfg_.min_samples);
        } catch (const SelectionError& err) {
            report.warnings.push_back("splitting stopped after round " + std::to_string(r) + ": " + err.what());
            break;
        }
        auto ev = split(target, SplitMode::variance);
        if (!report.epochs.empty()) report.epochs.back().splits.push_back(ev);
        report.splits.push_back(ev);
    }
    auto epochs = run_round();
    report.epochs.insert(report.epochs.end(), epochs.begin(), epochs.end());
    return report;
}

TrainingReport Trainer::forced_split_round(UnitId j) {
    if (j >= model_.units()) throw DomainError("cannot split unknown unit " + std::to_string(j));
    TrainingReport report;
    report.epochs = run_round();
    auto ev = split(j, SplitMode::forced);
    if (!report.epochs.empty()) report.epochs.back().splits.push_back(ev);
    report.splits.push_back(ev);
    auto epochs = run_round();
    report.epochs.insert(report.epochs.end(), epochs.begin(), epochs.end());
    return report;
}

// ---- checkpoints ---------------------------------------------------------

namespace {

using nlohmann::json;

json network_to_json(const nn::Network& net) {
    json layers = json::array();
    for (const auto& l : net) {
        layers.push_back({{"rows", l.weights.rows},
                          {"cols", l.weights.cols},
                          {"weights", l.weights.data},
                          {"bias", l.bias},
                          {"activation", std::string(nn::to_string(l.activation))}});
    }
    return layers;
}

nn::Network network_from_json(const json& j) {
    nn::Network net;
    for (const auto& l : j) {
        nn::DenseLayer layer;
        layer.weights.rows = l.at("rows").get<std::size_t>();
        layer.weights.cols = l.at("cols").get<std::size_t>();
        layer.weights.data = l.at("weights").get<std::vector<double>>();
        layer.bias = l.at("bias").get<std::vector<double>>();
        layer.activation = nn::activation_from_string(l.at("activation").get<std::string>());
        if (layer.weights.data.size() != layer.weights.rows * layer.weights.cols ||
            layer.bias.size() != layer.weights.rows) {
            throw FormatError("checkpoint layer has inconsistent shape");
        }
        net.push_back(std::move(layer));
    }
    return net;
}

template <class Rng>
std::string rng_state(const Rng& rng) {
    std::ostringstream ss;
    ss << rng;
    return ss.str();
}

template <class Rng>
void set_rng_state(Rng& rng, const std::string& state) {
    std::istringstream ss(state);
    ss >> rng;
    if (!ss) throw FormatError("checkpoint RNG state is corrupt");
}

constexpr int checkpoint_version = 1;

} // namespace

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
    json j;
    j["format"] = "vcoder-checkpoint";
    j["version"] = checkpoint_version;
    json cfg = json::object();
    for (const auto& [k, v] : cfg_.entries()) cfg[k] = v;
    j["config"] = cfg;
    j["dataset"] = {{"entities", store_->num_entities()},
                    {"relations", store_->num_relations()},
                    {"triples", store_->num_triples()}};
    j["shape"] = {{"input_dim", model_.shape.input_dim},
                  {"hidden_dim", model_.shape.hidden_dim},
                  {"fingerprint_dim", model_.shape.fingerprint_dim},
                  {"num_relations", model_.shape.num_relations},
                  {"hidden_activation", std::string(nn::to_string(model_.shape.hidden_activation))}};
    j["encoder"] = network_to_json(model_.encoder);
    j["decoder"] = network_to_json(model_.decoder);
    json lineage = json::array();
    for (const auto& l : model_.competitive.lineage()) lineage.push_back({l.origin, l.generation});
    j["competitive"] = {{"dim", model_.competitive.dim()},
                        {"weights", model_.competitive.weights()},
                        {"lineage", lineage}};
    j["optimizer"] = {{"steps", optimizer_.steps()},
                      {"m", optimizer_.first_moments()},
                      {"v", optimizer_.second_moments()}};
    j["clock"] = {{"global_step", global_step_}, {"epsilon_clock", eps_clock_}, {"epochs", epoch_}};
    j["rng"] = {{"shuffle", rng_state(shuffle_rng_)}, {"explore", rng_state(explore_rng_)}};
    json stats = json::array();
    for (std::size_t u = 0; u < last_stats_.units(); ++u) {
        const auto unit = static_cast<UnitId>(u);
        stats.push_back({last_stats_.count(unit), last_stats_.mean(unit), last_stats_.m2(unit)});
    }
    j["last_epoch_stats"] = stats;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
    out << j.dump(1) << '\n';
    if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

Trainer Trainer::load_checkpoint(const std::filesystem::path& path, const TripleStore& store) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read checkpoint '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
    }
    try {
        if (j.at("format") != "vcoder-checkpoint" || j.at("version") != checkpoint_version) {
            throw FormatError("unsupported checkpoint format");
        }
        std::string cfg_text;
        for (const auto& [k, v] : j.at("config").items()) cfg_text += k + " = " + v.get<std::string>() + "\n";
        auto cfg = parse_config(cfg_text);
        if (store.incidence_mode() != cfg.incidence) {
            throw FormatError("checkpoint was trained with incidence mode '" + std::string(to_string(cfg.incidence)) +
                              "'");
        }
        const auto& ds = j.at("dataset");
        if (ds.at("entities").get<std::size_t>() != store.num_entities() ||
            ds.at("relations").get<std::size_t>() != store.num_relations()) {
            throw FormatError("checkpoint was trained on a dataset with different vocabularies");
        }

        VCoderModel model;
        const auto& s = j.at("shape");
        model.shape.input_dim = s.at("input_dim").get<std::size_t>();
        model.shape.hidden_dim = s.at("hidden_dim").get<std::size_t>();
        model.shape.fingerprint_dim = s.at("fingerprint_dim").get<std::size_t>();
        model.shape.num_relations = s.at("num_relations").get<std::size_t>();
        model.shape.hidden_activation = nn::activation_from_string(s.at("hidden_activation").get<std::string>());
        model.encoder = network_from_json(j.at("encoder"));
        model.decoder = network_from_json(j.at("decoder"));
        const auto& c = j.at("competitive");
        Lineage lineage;
        for (const auto& l : c.at("lineage")) lineage.push_back({l.at(0).get<RelationId>(), l.at(1).get<std::uint32_t>()});
        model.competitive = CompetitiveLayer::restore(c.at("dim").get<std::size_t>(),
                                                      c.at("weights").get<std::vector<double>>(), std::move(lineage),
                                                      model.shape.num_relations);

        Trainer t(store, cfg, std::move(model));
        const auto& opt = j.at("optimizer");
        t.optimizer_.restore(opt.at("steps").get<std::uint64_t>(),
                             opt.at("m").get<std::vector<std::vector<double>>>(),
                             opt.at("v").get<std::vector<std::vector<double>>>());
        const auto& clock = j.at("clock");
        t.global_step_ = clock.at("global_step").get<std::uint64_t>();
        t.eps_clock_ = clock.at("epsilon_clock").get<std::uint64_t>();
        t.epoch_ = clock.at("epochs").get<std::size_t>();
        set_rng_state(t.shuffle_rng_, j.at("rng").at("shuffle").get<std::string>());
        set_rng_state(t.explore_rng_, j.at("rng").at("explore").get<std::string>());
        UnitLossStats stats(t.model_.units());
        std::size_t u = 0;
        for (const auto& e : j.at("last_epoch_stats")) {
            stats.set(static_cast<UnitId>(u++), e.at(0).get<std::size_t>(), e.at(1).get<double>(),
                      e.at(2).get<double>());
        }
        t.last_stats_ = std::move(stats);
        return t;
    } catch (const json::exception& e) {
        throw FormatError("checkpoint '" + path.string() + "' is malformed: " + e.what());
    }
}

// ---- routing -------------------------------------------------------------

std::vector<UnitId> assign_units(const VCoderModel& model, const TripleStore& store, std::span<const Triple> triples) {
    std::vector<UnitId> out;
    out.reserve(triples.size());
    std::mt19937_64 unused(0);
    std::vector<double> x;
    for (const auto& t : triples) {
        const auto& units = model.competitive.units_of(t.relation);
        if (units.size() == 1) {
            out.push_back(units.front());
            continue;
        }
        triple_input(store, t, x);
        out.push_back(route_supervised(model, x, t.relation, 0.0, unused).unit);
    }
    return out;
}

// ---- CSV -----------------------------------------------------------------

std::string config_header(const TrainConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : cfg.entries()) out += "# " + k + " = " + v + "\n";
    return out;
}

void write_epoch_csv(std::ostream& out, const TrainConfig& cfg, const std::vector<EpochReport>& epochs) {
    out << config_header(cfg);
    out << "kind,epoch,global_step,unit,count,mean,variance,epsilon,mean_loss\n";
    for (const auto& e : epochs) {
        for (const auto& u : e.units) {
            out << "unit," << e.epoch << ',' << e.global_step << ',' << u.unit << ',' << u.count << ','
                << format_double(u.mean) << ',' << format_double(u.variance) << ",,\n";
        }
        out << "epoch," << e.epoch << ',' << e.global_step << ",," << e.samples << ",,," << format_double(e.epsilon)
            << ',' << format_double(e.mean_loss) << '\n';
    }
}

void write_lineage_csv(std::ostream& out, const TrainConfig& cfg, const Lineage& lineage, const Vocab& relations) {
    out << config_header(cfg);
    out << "unit,origin,generation,name\n";
    const auto names = split_relation_names(relations, lineage);
    for (std::size_t u = 0; u < lineage.size(); ++u) {
        out << u << ',' << lineage[u].origin << ',' << lineage[u].generation << ',' << csv_field(names[u]) << '\n';
    }
}

void write_splits_csv(std::ostream& out, const TrainConfig& cfg, const std::vector<SplitEvent>& splits) {
    out << config_header(cfg);
    out << "epoch,unit,twin,relation,mode,variance\n";
    for (const auto& s : splits) {
        out << s.epoch << ',' << s.unit << ',' << s.twin << ',' << s.relation << ','
            << (s.mode == SplitMode::forced ? "forced" : "variance") << ',' << format_double(s.variance) << '\n';
    }
}

} // namespace vcoder
