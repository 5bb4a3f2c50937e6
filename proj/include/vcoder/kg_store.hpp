#pragma once
// Knowledge-graph storage: vocabularies, triples, per-entity incident-relation
// index, loaders for TSV and OpenKE-style id files, relation merging and the
// split-aware exporter.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vcoder {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using UnitId = std::uint32_t;

struct Triple {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Dense, zero-based string <-> id bijection.
class Vocab {
public:
    Vocab() = default;
    explicit Vocab(std::vector<std::string> names);

    // Returns the id of `name`, appending it if unseen.
    std::uint32_t intern(std::string_view name);
    std::optional<std::uint32_t> find(std::string_view name) const;
    const std::string& name(std::uint32_t id) const;
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

// Which triples make a relation "incident" to an entity.
enum class IncidenceMode {
    any,          // head or tail side, one bit per relation
    head_only,    // literal {r | (x, r, y)}: outgoing edges only
    directional,  // outgoing relations in the first N_r bits, incoming in the next N_r
};

std::string_view to_string(IncidenceMode mode);
IncidenceMode incidence_mode_from_string(std::string_view text);

// Immutable after construction.
class TripleStore {
public:
    TripleStore() = default;
    TripleStore(Vocab entities, Vocab relations, std::vector<Triple> triples,
                IncidenceMode mode = IncidenceMode::any);

    const Vocab& entities() const { return entities_; }
    const Vocab& relations() const { return relations_; }
    std::span<const Triple> triples() const { return triples_; }
    IncidenceMode incidence_mode() const { return mode_; }

    std::size_t num_entities() const { return entities_.size(); }
    std::size_t num_relations() const { return relations_.size(); }
    std::size_t num_triples() const { return triples_.size(); }

    // Sorted, duplicate-free incident bits of entity `x` (relation ids, plus
    // N_r offsets for incoming edges in directional mode).
    std::span<const std::uint32_t> incidence(EntityId x) const;

    // Length of one entity encoding: N_r, or 2 N_r in directional mode.
    std::size_t encoding_width() const;
    // Length of a triple input: 2 * encoding_width().
    std::size_t input_width() const { return 2 * encoding_width(); }

    // Number of triples per relation id.
    std::vector<std::size_t> relation_counts() const;

    bool valid(const Triple& t) const;

private:
    Vocab entities_;
    Vocab relations_;
    std::vector<Triple> triples_;
    IncidenceMode mode_ = IncidenceMode::any;
    std::vector<std::size_t> incidence_offsets_;
    std::vector<std::uint32_t> incidence_bits_;
};

// A train store plus held-out splits over the same vocabularies. Incidence is
// built from the train split only.
struct Dataset {
    TripleStore train;
    std::vector<Triple> valid;
    std::vector<Triple> test;
};

struct MergeSpec {
    RelationId kept = 0;
    RelationId absorbed = 0;
};

struct MergeResult {
    TripleStore store;
    // Original relation id of every triple, index-aligned with store.triples().
    std::vector<RelationId> original;
};

struct UnitLineage {
    RelationId origin = 0;
    std::uint32_t generation = 0;

    friend bool operator==(const UnitLineage&, const UnitLineage&) = default;
};
using Lineage = std::vector<UnitLineage>;

// ---- loading -------------------------------------------------------------

TripleStore load_tsv(const std::filesystem::path& path,
                     IncidenceMode mode = IncidenceMode::any);
TripleStore load_id_format(const std::filesystem::path& dir,
                           IncidenceMode mode = IncidenceMode::any);

// train.txt / valid.txt / test.txt sharing one vocabulary.
Dataset load_tsv_dataset(const std::filesystem::path& dir,
                         IncidenceMode mode = IncidenceMode::any);
// train2id.txt plus optional valid2id.txt / test2id.txt.
Dataset load_id_dataset(const std::filesystem::path& dir,
                        IncidenceMode mode = IncidenceMode::any);
// Picks the loader from what `path` contains: a single TSV file, a directory
// with train2id.txt, or a directory with train.txt.
Dataset load_dataset(const std::filesystem::path& path,
                     IncidenceMode mode = IncidenceMode::any);

// ---- encodings -----------------------------------------------------------

std::vector<std::uint8_t> binary_encoding(const TripleStore& store, EntityId x);

// 1_h || 1_t as reals, ready for the encoder.
std::vector<double> triple_input(const TripleStore& store, const Triple& t);
// Same, written into `out` (resized to input_width()).
void triple_input(const TripleStore& store, const Triple& t, std::vector<double>& out);

// ---- corruption and export -----------------------------------------------

MergeResult merge_relations(const TripleStore& store, MergeSpec spec);

// Relation names after splitting: unit u keeps its origin's name when it is the
// origin unit, otherwise "<origin>#split<k>" with k counting that origin's
// extra units in id order. Index == unit id == exported relation id.
std::vector<std::string> split_relation_names(const Vocab& relations, const Lineage& lineage);

struct SplitAssignment {
    std::span<const UnitId> train;
    std::span<const UnitId> valid;
    std::span<const UnitId> test;
};

// Writes train.txt (+ valid/test when present) and the id-format files, with
// each triple relabeled to its assigned unit.
void export_split(const Dataset& data, const SplitAssignment& assignment,
                  const Lineage& lineage, const std::filesystem::path& dir);
void export_split(const TripleStore& store, std::span<const UnitId> assignment,
                  const Lineage& lineage, const std::filesystem::path& dir);

// Assignment that maps every triple to its own relation's origin unit.
std::vector<UnitId> identity_assignment(std::span<const Triple> triples);
Lineage identity_lineage(std::size_t num_relations);

} // namespace vcoder
