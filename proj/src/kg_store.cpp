#include "vcoder/kg_store.hpp"

#include "vcoder/error.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace vcoder {

namespace fs = std::filesystem;

// ---- Vocab ---------------------------------------------------------------

Vocab::Vocab(std::vector<std::string> names) {
    for (auto& n : names) {
        if (index_.contains(n)) throw FormatError("duplicate vocabulary entry '" + n + "'");
        index_.emplace(n, static_cast<std::uint32_t>(names_.size()));
        names_.push_back(std::move(n));
    }
}

std::uint32_t Vocab::intern(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
}

std::optional<std::uint32_t> Vocab::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocab::name(std::uint32_t id) const {
    if (id >= names_.size()) throw DomainError("vocabulary id " + std::to_string(id) + " out of range");
    return names_[id];
}

// ---- IncidenceMode -------------------------------------------------------

std::string_view to_string(IncidenceMode mode) {
    switch (mode) {
    case IncidenceMode::any: return "any";
    case IncidenceMode::head_only: return "head";
    case IncidenceMode::directional: return "directional";
    }
    return "any";
}

IncidenceMode incidence_mode_from_string(std::string_view text) {
    if (text == "any") return IncidenceMode::any;
    if (text == "head") return IncidenceMode::head_only;
    if (text == "directional") return IncidenceMode::directional;
    throw ConfigError("unknown incidence mode '" + std::string(text) + "' (any|head|directional)");
}

// ---- TripleStore ---------------------------------------------------------

TripleStore::TripleStore(Vocab entities, Vocab relations, std::vector<Triple> triples,
                         IncidenceMode mode)
    : entities_(std::move(entities)), relations_(std::move(relations)),
      triples_(std::move(triples)), mode_(mode) {
    const auto ne = entities_.size();
    const auto nr = static_cast<std::uint32_t>(relations_.size());
    for (const auto& t : triples_) {
        if (!valid(t)) {
            throw DomainError("triple (" + std::to_string(t.head) + ", " + std::to_string(t.relation) +
                              ", " + std::to_string(t.tail) + ") references unknown ids");
        }
    }

    std::vector<std::vector<std::uint32_t>> sets(ne);
    for (const auto& t : triples_) {
        switch (mode_) {
        case IncidenceMode::any:
            sets[t.head].push_back(t.relation);
            sets[t.tail].push_back(t.relation);
            break;
        case IncidenceMode::head_only:
            sets[t.head].push_back(t.relation);
            break;
        case IncidenceMode::directional:
            sets[t.head].push_back(t.relation);
            sets[t.tail].push_back(nr + t.relation);
            break;
        }
    }
    incidence_offsets_.assign(ne + 1, 0);
    for (std::size_t x = 0; x < ne; ++x) {
        auto& s = sets[x];
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        incidence_offsets_[x + 1] = incidence_offsets_[x] + s.size();
    }
    incidence_bits_.reserve(incidence_offsets_.back());
    for (const auto& s : sets) incidence_bits_.insert(incidence_bits_.end(), s.begin(), s.end());
}

std::span<const std::uint32_t> TripleStore::incidence(EntityId x) const {
    if (x >= entities_.size()) throw DomainError("entity id " + std::to_string(x) + " out of range");
    return std::span<const std::uint32_t>(incidence_bits_)
        .subspan(incidence_offsets_[x], incidence_offsets_[x + 1] - incidence_offsets_[x]);
}

std::size_t TripleStore::encoding_width() const {
    return mode_ == IncidenceMode::directional ? 2 * relations_.size() : relations_.size();
}

std::vector<std::size_t> TripleStore::relation_counts() const {
    std::vector<std::size_t> counts(relations_.size(), 0);
    for (const auto& t : triples_) ++counts[t.relation];
    return counts;
}

bool TripleStore::valid(const Triple& t) const {
    return t.head < entities_.size() && t.tail < entities_.size() && t.relation < relations_.size();
}

// ---- loading -------------------------------------------------------------

namespace {

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    return in;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool blank(std::string_view line) {
    return line.find_first_not_of(" \t") == std::string_view::npos;
}

void read_tsv_triples(const fs::path& path, Vocab& entities, Vocab& relations,
                      std::vector<Triple>& out) {
    auto in = open_input(path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (blank(line)) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 3) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields, got " +
                             std::to_string(fields.size()));
        }
        Triple t;
        t.head = entities.intern(fields[0]);
        t.relation = relations.intern(fields[1]);
        t.tail = entities.intern(fields[2]);
        out.push_back(t);
    }
    if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
}

std::size_t parse_count(const std::string& text, const fs::path& path, std::size_t lineno) {
    std::istringstream ss(text);
    long long n = -1;
    std::string rest;
    if (!(ss >> n) || n < 0 || (ss >> rest)) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected a non-negative count, got '" +
                          text + "'");
    }
    return static_cast<std::size_t>(n);
}

// "name<TAB>id" lines after a count line; ids must form 0..n-1.
Vocab read_id_map(const fs::path& path) {
    auto in = open_input(path);
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": missing count line");
    strip_cr(line);
    const auto declared = parse_count(line, path, lineno);

    std::vector<std::string> names(declared);
    std::vector<bool> seen(declared, false);
    std::set<std::string> seen_names;
    std::size_t entries = 0;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (blank(line)) continue;
        std::string name;
        std::string id_text;
        auto tab = line.rfind('\t');
        if (tab != std::string::npos) {
            name = line.substr(0, tab);
            id_text = line.substr(tab + 1);
        } else {
            auto sp = line.find_last_of(' ');
            if (sp == std::string::npos) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'name<TAB>id'");
            }
            name = line.substr(0, sp);
            id_text = line.substr(sp + 1);
        }
        std::size_t id = 0;
        try {
            std::size_t used = 0;
            id = std::stoull(id_text, &used);
            if (used != id_text.size()) throw std::invalid_argument(id_text);
        } catch (const std::exception&) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad id '" + id_text + "'");
        }
        if (id >= declared) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": id " + std::to_string(id) +
                              " outside declared count " + std::to_string(declared));
        }
        if (seen[id]) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": duplicate id " + id_text);
        if (!seen_names.insert(name).second) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": duplicate name '" + name + "'");
        }
        seen[id] = true;
        names[id] = std::move(name);
        ++entries;
    }
    if (entries != declared) {
        throw FormatError(path.string() + ": count line declares " + std::to_string(declared) + " entries, found " +
                          std::to_string(entries));
    }
    return Vocab(std::move(names));
}

// "head_id tail_id rel_id" lines after a count line.
std::vector<Triple> read_id_triples(const fs::path& path, std::size_t num_entities, std::size_t num_relations) {
    auto in = open_input(path);
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": missing count line");
    strip_cr(line);
    const auto declared = parse_count(line, path, lineno);

    std::vector<Triple> triples;
    triples.reserve(declared);
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (blank(line)) continue;
        std::istringstream ss(line);
        long long h = -1, t = -1, r = -1;
        std::string rest;
        if (!(ss >> h >> t >> r) || (ss >> rest)) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'head_id tail_id rel_id'");
        }
        if (h < 0 || t < 0 || r < 0 || static_cast<std::size_t>(h) >= num_entities ||
            static_cast<std::size_t>(t) >= num_entities || static_cast<std::size_t>(r) >= num_relations) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": unknown entity or relation id");
        }
        triples.push_back({static_cast<EntityId>(h), static_cast<RelationId>(r), static_cast<EntityId>(t)});
    }
    if (triples.size() != declared) {
        throw FormatError(path.string() + ": count line declares " + std::to_string(declared) + " triples, found " +
                          std::to_string(triples.size()));
    }
    return triples;
}

void require_file(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw IoError("missing file '" + path.string() + "'");
}

} // namespace

TripleStore load_tsv(const fs::path& path, IncidenceMode mode) {
    Vocab entities, relations;
    std::vector<Triple> triples;
    read_tsv_triples(path, entities, relations, triples);
    return TripleStore(std::move(entities), std::move(relations), std::move(triples), mode);
}

TripleStore load_id_format(const fs::path& dir, IncidenceMode mode) {
    return std::move(load_id_dataset(dir, mode).train);
}

Dataset load_tsv_dataset(const fs::path& dir, IncidenceMode mode) {
    require_file(dir / "train.txt");
    Vocab entities, relations;
    std::vector<Triple> train, valid, test;
    read_tsv_triples(dir / "train.txt", entities, relations, train);
    if (fs::exists(dir / "valid.txt")) read_tsv_triples(dir / "valid.txt", entities, relations, valid);
    if (fs::exists(dir / "test.txt")) read_tsv_triples(dir / "test.txt", entities, relations, test);
    Dataset out;
    out.train = TripleStore(std::move(entities), std::move(relations), std::move(train), mode);
    out.valid = std::move(valid);
    out.test = std::move(test);
    return out;
}

Dataset load_id_dataset(const fs::path& dir, IncidenceMode mode) {
    for (const char* f : {"train2id.txt", "entity2id.txt", "relation2id.txt"}) require_file(dir / f);
    auto entities = read_id_map(dir / "entity2id.txt");
    auto relations = read_id_map(dir / "relation2id.txt");
    const auto ne = entities.size();
    const auto nr = relations.size();
    Dataset out;
    auto train = read_id_triples(dir / "train2id.txt", ne, nr);
    if (fs::exists(dir / "valid2id.txt")) out.valid = read_id_triples(dir / "valid2id.txt", ne, nr);
    if (fs::exists(dir / "test2id.txt")) out.test = read_id_triples(dir / "test2id.txt", ne, nr);
    out.train = TripleStore(std::move(entities), std::move(relations), std::move(train), mode);
    return out;
}

Dataset load_dataset(const fs::path& path, IncidenceMode mode) {
    if (fs::is_regular_file(path)) return Dataset{load_tsv(path, mode), {}, {}};
    if (!fs::is_directory(path)) throw IoError("dataset path '" + path.string() + "' does not exist");
    if (fs::exists(path / "train2id.txt")) return load_id_dataset(path, mode);
    if (fs::exists(path / "train.txt")) return load_tsv_dataset(path, mode);
    throw IoError("'" + path.string() + "' holds neither train.txt nor train2id.txt");
}

// ---- encodings -----------------------------------------------------------

std::vector<std::uint8_t> binary_encoding(const TripleStore& store, EntityId x) {
    std::vector<std::uint8_t> bits(store.encoding_width(), 0);
    for (auto r : store.incidence(x)) bits[r] = 1;
    return bits;
}

void triple_input(const TripleStore& store, const Triple& t, std::vector<double>& out) {
    if (!store.valid(t)) throw DomainError("triple is not valid in this store");
    const auto width = store.encoding_width();
    out.assign(2 * width, 0.0);
    for (auto r : store.incidence(t.head)) out[r] = 1.0;
    for (auto r : store.incidence(t.tail)) out[width + r] = 1.0;
}

std::vector<double> triple_input(const TripleStore& store, const Triple& t) {
    std::vector<double> out;
    triple_input(store, t, out);
    return out;
}

// ---- corruption ----------------------------------------------------------

MergeResult merge_relations(const TripleStore& store, MergeSpec spec) {
    const auto nr = store.num_relations();
    if (spec.kept >= nr || spec.absorbed >= nr) throw SpecError("merge references an unknown relation id");
    if (spec.kept == spec.absorbed) throw SpecError("cannot merge relation " + std::to_string(spec.kept) + " with itself");
    auto counts = store.relation_counts();
    if (counts[spec.kept] == 0 || counts[spec.absorbed] == 0) {
        throw SpecError("merge requires both relations to have at least one triple");
    }

    MergeResult out;
    std::vector<Triple> triples(store.triples().begin(), store.triples().end());
    out.original.reserve(triples.size());
    for (auto& t : triples) {
        out.original.push_back(t.relation);
        if (t.relation == spec.absorbed) t.relation = spec.kept;
    }
    out.store = TripleStore(store.entities(), store.relations(), std::move(triples), store.incidence_mode());
    return out;
}

// ---- export --------------------------------------------------------------

std::vector<std::string> split_relation_names(const Vocab& relations, const Lineage& lineage) {
    const auto nr = relations.size();
    if (lineage.size() < nr) throw SpecError("lineage has fewer units than relations");
    for (std::size_t r = 0; r < nr; ++r) {
        if (relations.name(static_cast<std::uint32_t>(r)).find('#') != std::string::npos) {
            throw SpecError("relation name '" + relations.name(static_cast<std::uint32_t>(r)) +
                            "' contains '#', which is reserved for split names");
        }
        if (lineage[r].origin != r) throw SpecError("unit " + std::to_string(r) + " is not its relation's origin unit");
    }
    std::vector<std::string> names;
    names.reserve(lineage.size());
    std::vector<std::uint32_t> extra(nr, 0);
    for (std::size_t u = 0; u < lineage.size(); ++u) {
        const auto origin = lineage[u].origin;
        if (origin >= nr) throw SpecError("unit " + std::to_string(u) + " has unknown origin relation");
        if (u < nr) {
            names.push_back(relations.name(origin));
        } else {
            names.push_back(relations.name(origin) + "#split" + std::to_string(++extra[origin]));
        }
    }
    return names;
}

namespace {

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

void check_assignment(std::span<const Triple> triples, std::span<const UnitId> assignment,
                      const Lineage& lineage, const char* split) {
    if (assignment.size() != triples.size()) {
        throw SpecError(std::string(split) + ": assignment covers " + std::to_string(assignment.size()) +
                        " of " + std::to_string(triples.size()) + " triples");
    }
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const auto u = assignment[i];
        if (u >= lineage.size()) throw SpecError(std::string(split) + ": assignment to unknown unit " + std::to_string(u));
        if (lineage[u].origin != triples[i].relation) {
            throw SpecError(std::string(split) + ": triple " + std::to_string(i) + " assigned to unit " +
                            std::to_string(u) + " outside its relation's lineage");
        }
    }
}

void write_split(const fs::path& dir, const std::string& stem, std::span<const Triple> triples,
                 std::span<const UnitId> assignment, const Vocab& entities,
                 const std::vector<std::string>& relation_names) {
    auto tsv = open_output(dir / (stem + ".txt"));
    auto ids = open_output(dir / (stem + "2id.txt"));
    ids << triples.size() << '\n';
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const auto& t = triples[i];
        const auto u = assignment[i];
        tsv << entities.name(t.head) << '\t' << relation_names[u] << '\t' << entities.name(t.tail) << '\n';
        ids << t.head << ' ' << t.tail << ' ' << u << '\n';
    }
    if (!tsv || !ids) throw IoError("failed writing split '" + stem + "' under '" + dir.string() + "'");
}

} // namespace

void export_split(const Dataset& data, const SplitAssignment& assignment, const Lineage& lineage,
                  const fs::path& dir) {
    const auto& store = data.train;
    check_assignment(store.triples(), assignment.train, lineage, "train");
    check_assignment(data.valid, assignment.valid, lineage, "valid");
    check_assignment(data.test, assignment.test, lineage, "test");
    const auto names = split_relation_names(store.relations(), lineage);

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

    {
        auto out = open_output(dir / "entity2id.txt");
        out << store.num_entities() << '\n';
        for (std::size_t i = 0; i < store.num_entities(); ++i) {
            out << store.entities().name(static_cast<EntityId>(i)) << '\t' << i << '\n';
        }
        if (!out) throw IoError("failed writing entity2id.txt");
    }
    {
        auto out = open_output(dir / "relation2id.txt");
        out << names.size() << '\n';
        for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << '\t' << i << '\n';
        if (!out) throw IoError("failed writing relation2id.txt");
    }
    write_split(dir, "train", store.triples(), assignment.train, store.entities(), names);
    if (!data.valid.empty()) write_split(dir, "valid", data.valid, assignment.valid, store.entities(), names);
    if (!data.test.empty()) write_split(dir, "test", data.test, assignment.test, store.entities(), names);
}

void export_split(const TripleStore& store, std::span<const UnitId> assignment, const Lineage& lineage,
                  const fs::path& dir) {
    Dataset data{store, {}, {}};
    export_split(data, SplitAssignment{assignment, {}, {}}, lineage, dir);
}

std::vector<UnitId> identity_assignment(std::span<const Triple> triples) {
    std::vector<UnitId> out;
    out.reserve(triples.size());
    for (const auto& t : triples) out.push_back(t.relation);
    return out;
}

Lineage identity_lineage(std::size_t num_relations) {
    Lineage out(num_relations);
    for (std::size_t r = 0; r < num_relations; ++r) out[r] = {static_cast<RelationId>(r), 0};
    return out;
}

} // namespace vcoder
