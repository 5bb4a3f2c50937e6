#include "vcoder/config.hpp"

#include "vcoder/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace vcoder {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

namespace {

std::string_view to_string(EpsilonFormula f) {
    return f == EpsilonFormula::standard ? "standard" : "literal";
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool parse_size(const std::string& v, std::size_t& out) {
    if (v.empty() || v[0] == '-') return false;
    unsigned long long x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size()) return false;
    out = static_cast<std::size_t>(x);
    return true;
}

bool parse_real(const std::string& v, double& out) {
    double x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size()) return false;
    out = x;
    return true;
}

} // namespace

std::vector<std::pair<std::string, std::string>> TrainConfig::entries() const {
    return {
        {"hidden_dim", std::to_string(hidden_dim)},
        {"learning_rate", format_double(learning_rate)},
        {"batch_size", std::to_string(batch_size)},
        {"weight_decay", format_double(weight_decay)},
        {"eps_start", format_double(eps_start)},
        {"eps_end", format_double(eps_end)},
        {"eps_decay", format_double(eps_decay)},
        {"epochs_per_round", std::to_string(epochs_per_round)},
        {"rounds", std::to_string(rounds)},
        {"seed", std::to_string(seed)},
        {"incidence", std::string(vcoder::to_string(incidence))},
        {"epsilon_formula", std::string(to_string(epsilon_formula))},
        {"min_samples", std::to_string(min_samples)},
        {"hidden_activation", std::string(nn::to_string(hidden_activation))},
        {"top_k", std::to_string(top_k)},
        {"lp_dim", std::to_string(lp_dim)},
        {"lp_epochs", std::to_string(lp_epochs)},
        {"lp_batch_size", std::to_string(lp_batch_size)},
        {"lp_learning_rate", format_double(lp_learning_rate)},
        {"lp_negatives", std::to_string(lp_negatives)},
    };
}

std::string TrainConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
    return out;
}

void check_config(const TrainConfig& c) {
    std::vector<std::string> errs;
    auto need = [&](bool ok, const std::string& msg) {
        if (!ok) errs.push_back(msg);
    };
    need(c.hidden_dim > 0, "hidden_dim must be positive");
    need(c.learning_rate > 0 && std::isfinite(c.learning_rate), "learning_rate must be positive");
    need(c.batch_size > 0, "batch_size must be positive");
    need(c.weight_decay >= 0 && std::isfinite(c.weight_decay), "weight_decay must be non-negative");
    need(c.eps_start >= 0 && c.eps_start <= 1, "eps_start must lie in [0, 1]");
    need(c.eps_end >= 0 && c.eps_end <= 1, "eps_end must lie in [0, 1]");
    need(c.eps_decay > 0 && std::isfinite(c.eps_decay), "eps_decay must be positive");
    need(c.min_samples >= 2, "min_samples must be at least 2");
    need(c.lp_dim > 0, "lp_dim must be positive");
    need(c.lp_batch_size > 0, "lp_batch_size must be positive");
    need(c.lp_learning_rate > 0 && std::isfinite(c.lp_learning_rate), "lp_learning_rate must be positive");
    need(c.lp_negatives > 0, "lp_negatives must be positive");
    if (!errs.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : errs) msg += "\n  " + e;
        throw ConfigError(msg);
    }
}

TrainConfig parse_config(const std::string& text) {
    TrainConfig c;
    std::vector<std::string> errs;

    using Setter = std::function<bool(const std::string&)>;
    auto size_field = [](std::size_t& f) -> Setter { return [&f](const std::string& v) { return parse_size(v, f); }; };
    auto real_field = [](double& f) -> Setter { return [&f](const std::string& v) { return parse_real(v, f); }; };
    std::size_t seed = c.seed;
    const std::map<std::string, Setter> setters = {
        {"hidden_dim", size_field(c.hidden_dim)},
        {"learning_rate", real_field(c.learning_rate)},
        {"batch_size", size_field(c.batch_size)},
        {"weight_decay", real_field(c.weight_decay)},
        {"eps_start", real_field(c.eps_start)},
        {"eps_end", real_field(c.eps_end)},
        {"eps_decay", real_field(c.eps_decay)},
        {"epochs_per_round", size_field(c.epochs_per_round)},
        {"rounds", size_field(c.rounds)},
        {"seed", size_field(seed)},
        {"incidence",
         [&c](const std::string& v) {
             try {
                 c.incidence = incidence_mode_from_string(v);
                 return true;
             } catch (const ConfigError&) {
                 return false;
             }
         }},
        {"epsilon_formula",
         [&c](const std::string& v) {
             if (v == "standard") c.epsilon_formula = EpsilonFormula::standard;
             else if (v == "literal") c.epsilon_formula = EpsilonFormula::literal;
             else return false;
             return true;
         }},
        {"min_samples", size_field(c.min_samples)},
        {"hidden_activation",
         [&c](const std::string& v) {
             try {
                 c.hidden_activation = nn::activation_from_string(v);
                 return true;
             } catch (const ConfigError&) {
                 return false;
             }
         }},
        {"top_k", size_field(c.top_k)},
        {"lp_dim", size_field(c.lp_dim)},
        {"lp_epochs", size_field(c.lp_epochs)},
        {"lp_batch_size", size_field(c.lp_batch_size)},
        {"lp_learning_rate", real_field(c.lp_learning_rate)},
        {"lp_negatives", size_field(c.lp_negatives)},
    };

    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            errs.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
            continue;
        }
        const auto key = trim(std::string_view(body).substr(0, eq));
        const auto value = trim(std::string_view(body).substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end()) {
            errs.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        } else if (!it->second(value)) {
            errs.push_back("line " + std::to_string(lineno) + ": invalid value '" + value + "' for " + key);
        }
    }
    c.seed = seed;
    if (!errs.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : errs) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    check_config(c);
    return c;
}

TrainConfig validate_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

double epsilon_at(const TrainConfig& cfg, std::uint64_t t) {
    const double decay = std::exp(-static_cast<double>(t) * cfg.eps_decay);
    if (cfg.epsilon_formula == EpsilonFormula::literal) {
        return (cfg.eps_start + (cfg.eps_end - cfg.eps_start)) * decay;
    }
    return cfg.eps_end + (cfg.eps_start - cfg.eps_end) * decay;
}

} // namespace vcoder
