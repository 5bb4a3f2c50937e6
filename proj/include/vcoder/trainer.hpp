#pragma once
// Training driver: shuffled mini-batch epochs grouped in rounds, variance-driven
// (or forced) splits between rounds, per-epoch reports and checkpoints.

#include "vcoder/config.hpp"
#include "vcoder/kg_store.hpp"
#include "vcoder/vcoder.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace vcoder {

enum class SplitMode { variance, forced };

struct SplitEvent {
    std::size_t epoch = 0;  // global epoch count when the split happened
    UnitId unit = 0;
    UnitId twin = 0;
    RelationId relation = 0;
    SplitMode mode = SplitMode::variance;
    double variance = 0.0;
};

struct UnitEpochStats {
    UnitId unit = 0;
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;
};

struct EpochReport {
    std::size_t epoch = 0;
    std::uint64_t global_step = 0;
    double mean_loss = 0.0;
    std::size_t samples = 0;
    double epsilon = 0.0;
    std::vector<UnitEpochStats> units;
    std::vector<SplitEvent> splits;
};

struct TrainingReport {
    std::vector<EpochReport> epochs;
    std::vector<SplitEvent> splits;
    std::vector<std::string> warnings;
};

class Trainer {
public:
    // Fresh model for `store`, seeded from cfg.seed.
    Trainer(const TripleStore& store, TrainConfig cfg);
    // Continues from an existing model (optimizer starts fresh).
    Trainer(const TripleStore& store, TrainConfig cfg, VCoderModel model);

    // epochs_per_round epochs; returns one report per epoch.
    std::vector<EpochReport> run_round();
    std::vector<EpochReport> run_epochs(std::size_t epochs);

    // Splits unit j, mirrors optimizer moments, resets the exploration clock.
    SplitEvent split(UnitId j, SplitMode mode);

    // rounds x (round, select by variance, split) followed by one final round.
    TrainingReport run_adaptive();
    // One round, forced split of j, one more round.
    TrainingReport forced_split_round(UnitId j);

    double epsilon() const { return epsilon_at(cfg_, eps_clock_); }

    const VCoderModel& model() const { return model_; }
    VCoderModel& model() { return model_; }
    const TrainConfig& config() const { return cfg_; }
    const TripleStore& store() const { return *store_; }
    const UnitLossStats& last_epoch_stats() const { return last_stats_; }
    std::uint64_t global_step() const { return global_step_; }
    std::uint64_t epsilon_clock() const { return eps_clock_; }
    std::size_t epochs_done() const { return epoch_; }
    const nn::AdamState& optimizer() const { return optimizer_; }

    void save_checkpoint(const std::filesystem::path& path) const;
    static Trainer load_checkpoint(const std::filesystem::path& path, const TripleStore& store);

private:
    EpochReport run_epoch();
    void check_store() const;

    const TripleStore* store_;
    TrainConfig cfg_;
    VCoderModel model_;
    nn::AdamState optimizer_;
    std::mt19937_64 shuffle_rng_;
    std::mt19937_64 explore_rng_;
    std::uint64_t global_step_ = 0;
    std::uint64_t eps_clock_ = 0;
    std::size_t epoch_ = 0;
    UnitLossStats last_stats_;
    std::vector<std::size_t> order_;
};

// ---- routing of whole splits --------------------------------------------

// Evaluation routing (epsilon = 0): each triple's unit within its relation's
// lineage.
std::vector<UnitId> assign_units(const VCoderModel& model, const TripleStore& store, std::span<const Triple> triples);

// ---- CSV -----------------------------------------------------------------

// "# key = value" header lines for every config field.
std::string config_header(const TrainConfig& cfg);

// Columns: kind,epoch,global_step,unit,count,mean,variance,epsilon,mean_loss.
// kind is "unit" for per-unit rows and "epoch" for the summary row.
void write_epoch_csv(std::ostream& out, const TrainConfig& cfg, const std::vector<EpochReport>& epochs);
// Columns: unit,origin,generation,name.
void write_lineage_csv(std::ostream& out, const TrainConfig& cfg, const Lineage& lineage, const Vocab& relations);
// Columns: epoch,unit,twin,relation,mode,variance.
void write_splits_csv(std::ostream& out, const TrainConfig& cfg, const std::vector<SplitEvent>& splits);

} // namespace vcoder
