#include "vcoder/cli.hpp"

#include "vcoder/config.hpp"
#include "vcoder/error.hpp"
#include "vcoder/experiments.hpp"
#include "vcoder/kg_store.hpp"
#include "vcoder/linkpred.hpp"
#include "vcoder/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace vcoder::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config;
    std::string data;
    std::string out = "runs";
    std::string run_id = "default";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> rounds;
    std::string pair;
    std::vector<std::uint32_t> relations;
    std::string checkpoint;
};

struct Context {
    TrainConfig cfg;
    fs::path run_dir;
    std::ostream& out;
};

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + path.string() + "'");
    return f;
}

MergeSpec parse_pair(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw ConfigError("--pair expects 'A,B', got '" + text + "'");
    try {
        std::size_t used = 0;
        const auto a = std::stoul(text.substr(0, comma), &used);
        if (used != comma) throw std::invalid_argument(text);
        const auto rest = text.substr(comma + 1);
        const auto b = std::stoul(rest, &used);
        if (used != rest.size()) throw std::invalid_argument(text);
        return {static_cast<RelationId>(a), static_cast<RelationId>(b)};
    } catch (const std::logic_error&) {
        throw ConfigError("--pair expects two relation ids 'A,B', got '" + text + "'");
    }
}

Dataset load(const Options& o, const TrainConfig& cfg) {
    if (o.data.empty()) throw ConfigError("--data is required");
    return load_dataset(o.data, cfg.incidence);
}

Trainer make_trainer(const Options& o, const Dataset& data, const TrainConfig& cfg) {
    if (!o.checkpoint.empty()) return Trainer::load_checkpoint(o.checkpoint, data.train);
    return Trainer(data.train, cfg);
}

void write_training(const Context& ctx, const Trainer& trainer, const TrainingReport& report) {
    {
        auto f = open_out(ctx.run_dir / "epochs.csv");
        write_epoch_csv(f, ctx.cfg, report.epochs);
    }
    {
        auto f = open_out(ctx.run_dir / "splits.csv");
        write_splits_csv(f, ctx.cfg, report.splits);
    }
    {
        auto f = open_out(ctx.run_dir / "lineage.csv");
        write_lineage_csv(f, ctx.cfg, trainer.model().competitive.lineage(), trainer.store().relations());
    }
    trainer.save_checkpoint(ctx.run_dir / "checkpoint.json");
    for (const auto& w : report.warnings) ctx.out << "warning: " << w << '\n';
    if (!report.epochs.empty()) {
        ctx.out << "final mean loss: " << format_double(report.epochs.back().mean_loss) << '\n';
    }
    ctx.out << "units: " << trainer.model().units() << " (" << report.splits.size() << " splits)\n";
}

void cmd_stats(const Options& o, const Context& ctx) {
    const auto data = load(o, ctx.cfg);
    const auto& s = data.train;
    std::size_t ne = s.num_entities();
    ctx.out << "N_e = " << ne << "\nN_r = " << s.num_relations() << "\ntrain = " << s.num_triples()
            << "\nvalid = " << data.valid.size() << "\ntest = " << data.test.size() << '\n';
    auto f = open_out(ctx.run_dir / "stats.csv");
    f << config_header(ctx.cfg);
    f << "entities,relations,train,valid,test\n";
    f << ne << ',' << s.num_relations() << ',' << s.num_triples() << ',' << data.valid.size() << ','
      << data.test.size() << '\n';
}

void cmd_train(const Options& o, const Context& ctx) {
    const auto data = load(o, ctx.cfg);
    auto trainer = make_trainer(o, data, ctx.cfg);
    const auto report = trainer.run_adaptive();
    write_training(ctx, trainer, report);
}

void cmd_recover(const Options& o, const Context& ctx) {
    if (o.pair.empty()) throw ConfigError("recover requires --pair A,B");
    const auto pair = parse_pair(o.pair);
    const auto data = load(o, ctx.cfg);
    const auto result = recovery_experiment(data.train, pair, ctx.cfg);
    {
        auto f = open_out(ctx.run_dir / "recovery.csv");
        write_recovery_csv(f, ctx.cfg, result);
    }
    {
        auto f = open_out(ctx.run_dir / "epochs.csv");
        write_epoch_csv(f, ctx.cfg, result.training.epochs);
    }
    ctx.out << "relation " << pair.kept << ": " << format_double(100.0 * result.accuracy[0]) << "%\n"
            << "relation " << pair.absorbed << ": " << format_double(100.0 * result.accuracy[1]) << "%\n"
            << "average: " << format_double(100.0 * result.average) << "%\n";
}

void cmd_split_export(const Options& o, const Context& ctx) {
    const auto data = load(o, ctx.cfg);
    auto trainer = make_trainer(o, data, ctx.cfg);
    if (o.checkpoint.empty()) {
        const auto report = trainer.run_adaptive();
        write_training(ctx, trainer, report);
    }
    const auto& model = trainer.model();
    const auto train = assign_units(model, data.train, data.train.triples());
    const auto valid = assign_units(model, data.train, data.valid);
    const auto test = assign_units(model, data.train, data.test);
    export_split(data, SplitAssignment{train, valid, test}, model.competitive.lineage(), ctx.run_dir / "dataset");
    ctx.out << "exported " << model.units() << " relations to " << (ctx.run_dir / "dataset").string() << '\n';
}

void cmd_loss_profile(const Options& o, const Context& ctx) {
    if (o.relations.empty()) throw ConfigError("loss-profile requires --relation");
    const auto data = load(o, ctx.cfg);
    const std::vector<RelationId> rels(o.relations.begin(), o.relations.end());
    for (auto r : rels) {
        if (r >= data.train.num_relations()) throw DomainError("relation " + std::to_string(r) + " out of range");
    }
    auto trainer = make_trainer(o, data, ctx.cfg);
    const auto dump = [&](const std::vector<RelationTrace>& traces, const std::string& stem) {
        auto f = open_out(ctx.run_dir / (stem + ".csv"));
        write_trace_csv(f, ctx.cfg, traces);
        auto g = open_out(ctx.run_dir / (stem + "_summary.csv"));
        write_trace_summary_csv(g, ctx.cfg, traces);
    };
    if (!o.checkpoint.empty()) {
        dump(loss_profile(trainer.model(), data.train, rels), "loss_profile");
        return;
    }

    TrainingReport report;
    auto first = trainer.run_round();
    report.epochs = first;
    const auto before = loss_profile(trainer.model(), data.train, rels);
    dump(before, "loss_profile_before");
    for (std::size_t r = 0; r < ctx.cfg.rounds; ++r) {
        UnitId target = 0;
        try {
            target = select_split_candidate(trainer.last_epoch_stats(), ctx.cfg.min_samples);
        } catch (const SelectionError& err) {
            report.warnings.push_back(err.what());
            break;
        }
        auto ev = trainer.split(target, SplitMode::variance);
        if (!report.epochs.empty()) report.epochs.back().splits.push_back(ev);
        report.splits.push_back(ev);
        auto more = trainer.run_round();
        report.epochs.insert(report.epochs.end(), more.begin(), more.end());
    }
    write_training(ctx, trainer, report);
    if (report.splits.empty()) return;
    const auto after = loss_profile(trainer.model(), data.train, rels);
    dump(after, "loss_profile_after");
    std::vector<SplitEffect> effects;
    for (std::size_t i = 0; i < rels.size() && i < before.size(); ++i) {
        effects.push_back(split_effect(before[i], after[i], before[i].relation));
    }
    auto f = open_out(ctx.run_dir / "split_effect.csv");
    write_split_effect_csv(f, ctx.cfg, effects);
    for (const auto& e : effects) {
        ctx.out << "relation " << e.relation << ": mean " << format_double(e.mean_before) << " -> "
                << format_double(e.mean_after) << '\n';
    }
}

void cmd_disclose(const Options& o, const Context& ctx) {
    if (o.relations.size() != 1) throw ConfigError("disclose requires exactly one --relation");
    const auto data = load(o, ctx.cfg);
    auto trainer = make_trainer(o, data, ctx.cfg);
    if (o.checkpoint.empty()) {
        const auto report = trainer.run_adaptive();
        write_training(ctx, trainer, report);
    }
    const auto rel = o.relations.front();
    const auto report = disclosure_report(trainer.model(), data.train, rel, ctx.cfg.top_k);
    auto f = open_out(ctx.run_dir / "disclosure.csv");
    write_disclosure_csv(f, ctx.cfg, report, data.train.relations());
    for (const auto& u : report.units) {
        ctx.out << "unit " << u.unit << " (" << u.triples << " triples)";
        if (!u.top_heads.empty()) ctx.out << " top head " << u.top_heads.front().name << " x" << u.top_heads.front().count;
        ctx.out << '\n';
    }
}

void cmd_linkpred(const Options& o, const Context& ctx) {
    const auto data = load(o, ctx.cfg);
    const auto& test = data.test.empty() ? data.valid : data.test;
    if (test.empty()) throw DomainError("dataset has neither test nor valid triples to rank");
    linkpred::TrainOptions lp;
    lp.dim = ctx.cfg.lp_dim;
    lp.epochs = ctx.cfg.lp_epochs;
    lp.batch_size = ctx.cfg.lp_batch_size;
    lp.learning_rate = ctx.cfg.lp_learning_rate;
    lp.negatives = ctx.cfg.lp_negatives;
    lp.seed = ctx.cfg.seed;
    const auto model = linkpred::train(data.train, lp);
    const auto metrics = linkpred::evaluate_filtered(model, data, test);
    auto f = open_out(ctx.run_dir / "metrics.csv");
    linkpred::write_metrics_csv(f, config_header(ctx.cfg), fs::path(o.data).filename().string(), metrics);
    ctx.out << "MRR = " << format_double(metrics.mrr) << "\nHits@1 = " << format_double(metrics.hits1)
            << "\nHits@10 = " << format_double(metrics.hits10) << '\n';
}

int exit_code_for(const Error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return config_error;
    if (dynamic_cast<const NumericError*>(&e)) return numeric_error;
    return data_error;
}

void report_error(std::ostream& err, const std::string& kind, int code, const std::string& message) {
    nlohmann::json line = {{"error", kind}, {"exit", code}, {"message", message}};
    err << line.dump() << '\n';
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Adaptive autoencoder for relation resolution in knowledge graphs", "vcoder"};
    app.require_subcommand(1, 1);
    Options o;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "key = value config file");
        sub->add_option("--data", o.data, "dataset: TSV file, TSV split directory or id-format directory");
        sub->add_option("--out", o.out, "output root");
        sub->add_option("--run-id", o.run_id, "run directory name under --out");
        sub->add_option("--seed", o.seed, "override the config seed");
    };
    auto* stats = app.add_subcommand("stats", "dataset statistics");
    auto* train = app.add_subcommand("train", "adaptive training with variance-driven splits");
    auto* recover = app.add_subcommand("recover", "merge two relations and measure recovery");
    auto* exporter = app.add_subcommand("split-export", "train and export the split-augmented dataset");
    auto* profile = app.add_subcommand("loss-profile", "per-relation reconstruction loss traces");
    auto* disclose = app.add_subcommand("disclose", "head/tail frequency report of a split relation");
    auto* lp = app.add_subcommand("linkpred", "DistMult filtered link prediction");
    for (auto* sub : {stats, train, recover, exporter, profile, disclose, lp}) common(sub);
    for (auto* sub : {train, recover, exporter, profile, disclose}) {
        sub->add_option("--rounds", o.rounds, "override the number of split rounds");
    }
    for (auto* sub : {exporter, profile, disclose}) {
        sub->add_option("--checkpoint", o.checkpoint, "reuse a trained checkpoint instead of training");
    }
    recover->add_option("--pair", o.pair, "relation ids A,B: B is merged into A")->required();
    profile->add_option("--relation", o.relations, "relation id(s)")->delimiter(',')->required();
    disclose->add_option("--relation", o.relations, "relation id")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        report_error(err, "config", config_error, e.what());
        return config_error;
    }

    try {
        TrainConfig cfg = o.config.empty() ? TrainConfig{} : validate_config(o.config);
        if (o.seed) cfg.seed = *o.seed;
        if (o.rounds) cfg.rounds = *o.rounds;
        check_config(cfg);

        const fs::path run_dir = fs::path(o.out) / o.run_id;
        std::error_code ec;
        fs::create_directories(run_dir, ec);
        if (ec) throw IoError("cannot create run directory '" + run_dir.string() + "': " + ec.message());
        {
            auto f = open_out(run_dir / "config.txt");
            f << cfg.to_text();
        }
        out << "# resolved configuration\n" << cfg.to_text();

        Context ctx{cfg, run_dir, out};
        const auto* sub = app.get_subcommands().front();
        const auto& name = sub->get_name();
        if (name == "stats") cmd_stats(o, ctx);
        else if (name == "train") cmd_train(o, ctx);
        else if (name == "recover") cmd_recover(o, ctx);
        else if (name == "split-export") cmd_split_export(o, ctx);
        else if (name == "loss-profile") cmd_loss_profile(o, ctx);
        else if (name == "disclose") cmd_disclose(o, ctx);
        else if (name == "linkpred") cmd_linkpred(o, ctx);
        return ok;
    } catch (const Error& e) {
        const int code = exit_code_for(e);
        report_error(err, e.kind(), code, e.what());
        return code;
    } catch (const std::exception& e) {
        report_error(err, "internal", internal_error, e.what());
        return internal_error;
    }
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run(args, std::cout, std::cerr);
}

} // namespace vcoder::cli
