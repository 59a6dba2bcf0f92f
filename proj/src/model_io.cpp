#include "episteady/model_io.hpp"

#include "episteady/text.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace episteady {

ParseError::ParseError(const std::string& message, int line, int column)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                                        message
                                  : message),
      line_(line), column_(column) {}

namespace {

[[noreturn]] void fail(const YAML::Node& at, const std::string& message) {
    const YAML::Mark mark = at.IsDefined() ? at.Mark() : YAML::Mark::null_mark();
    if (mark.is_null()) throw ParseError(message, 0, 0);
    throw ParseError(message, mark.line + 1, mark.column + 1);
}

YAML::Node load_text(std::string_view text) {
    try {
        return YAML::Load(std::string(text));
    } catch (const YAML::ParserException& e) {
        throw ParseError(e.msg, e.mark.line + 1, e.mark.column + 1);
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path.string() + "'", 0, 0);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Locale-independent and correctly rounded, so 17-digit text round-trips exactly.
double number(const YAML::Node& node, const std::string& what) {
    if (!node.IsScalar()) fail(node, what + ": expected a number");
    const std::string& text = node.Scalar();
    double value = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value))
        fail(node, what + ": '" + text + "' is not a finite number");
    return value;
}

std::vector<std::string> name_list(const YAML::Node& root, const char* key) {
    const YAML::Node node = root[key];
    if (!node) fail(root, std::string("missing key '") + key + "'");
    if (!node.IsSequence() || node.size() == 0) fail(node, std::string("'") + key + "' must be a non-empty list");
    std::vector<std::string> out;
    for (const auto& item : node) {
        if (!item.IsScalar()) fail(item, std::string("'") + key + "' entries must be names");
        out.push_back(item.Scalar());
    }
    return out;
}

template <class Lookup>
std::size_t resolve(const YAML::Node& key, Lookup&& lookup, const char* kind) {
    const auto index = lookup(key.Scalar());
    if (!index) fail(key, std::string("unknown ") + kind + " '" + key.Scalar() + "'");
    return *index;
}

// Checks a probability vector and renormalizes small drift; `where` names it in messages.
void settle(std::vector<double>& p, const YAML::Node& at, const std::string& where,
            std::vector<std::string>& warnings) {
    double sum = 0.0;
    for (double x : p) sum += x;
    const double drift = std::abs(sum - 1.0);
    if (drift > kParseRowTolerance)
        fail(at, where + " sums to " + format_double17(sum) + ", not 1");
    if (drift > kRowTolerance) {
        for (double& x : p) x /= sum;
        warnings.push_back(where + " summed to " + format_double17(sum) + "; renormalized");
    }
}

std::vector<double> probability_map(const YAML::Node& node, const Mdp& m, const std::string& where,
                                    std::vector<std::string>& warnings) {
    if (!node.IsMap()) fail(node, where + " must be a map of state to probability");
    std::vector<double> p(m.num_states(), 0.0);
    for (const auto& kv : node) {
        const std::size_t s = resolve(kv.first, [&](const std::string& n) { return m.state_index(n); }, "state");
        const double v = number(kv.second, where);
        if (v < 0.0 || v > 1.0) fail(kv.second, where + ": probability outside [0, 1]");
        p[s] += v;
    }
    settle(p, node, where, warnings);
    return p;
}

TransitionRow to_row(const std::vector<double>& p) {
    TransitionRow row;
    for (std::size_t s = 0; s < p.size(); ++s)
        if (p[s] != 0.0) row.push_back({s, p[s]});
    return row;
}

// A name-only Mdp used to resolve state names before the real one exists.
Mdp name_shell(const std::vector<std::string>& states, const std::vector<std::string>& actions) {
    const std::size_t n = states.size();
    std::vector<TransitionRow> rows(n * actions.size(), TransitionRow{{0, 1.0}});
    Distribution init = Distribution::Zero(static_cast<Eigen::Index>(n));
    init[0] = 1.0;
    return Mdp(states, actions, std::move(rows), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), init);
}

DiscountSpec parse_gamma(const YAML::Node& node, const Mdp& shell) {
    if (!node) return EpisodicDiscount{};
    if (node.IsScalar() && node.Scalar() == "episodic") return EpisodicDiscount{};
    if (node.IsScalar()) {
        const double g = number(node, "gamma");
        if (g < 0.0 || g > 1.0) fail(node, "gamma must lie in [0, 1]");
        return ConstantDiscount{g};
    }
    if (!node.IsMap()) fail(node, "gamma must be 'episodic', a number, or a map of state to number");
    std::vector<double> values(shell.num_states(), std::nan(""));
    for (const auto& kv : node) {
        const std::size_t s = resolve(kv.first, [&](const std::string& n) { return shell.state_index(n); }, "state");
        const double g = number(kv.second, "gamma");
        if (g < 0.0 || g > 1.0) fail(kv.second, "gamma must lie in [0, 1]");
        values[s] = g;
    }
    for (std::size_t s = 0; s < values.size(); ++s)
        if (std::isnan(values[s])) fail(node, "gamma has no entry for state '" + shell.states()[s] + "'");
    return PerStateDiscount{std::move(values)};
}

YAML::Node require_map(const YAML::Node& root, const char* key) {
    const YAML::Node node = root[key];
    if (!node) fail(root, std::string("missing key '") + key + "'");
    if (!node.IsMap()) fail(node, std::string("'") + key + "' must be a map");
    return node;
}

// Map state -> action -> value, shared by policy and theta files.
template <class Cell>
void for_each_cell(const YAML::Node& root, const Mdp& m, Cell&& cell) {
    if (!root.IsMap()) fail(root, "expected a map of state to action values");
    for (const auto& skv : root) {
        const std::size_t s = resolve(skv.first, [&](const std::string& n) { return m.state_index(n); }, "state");
        if (!skv.second.IsMap()) fail(skv.second, "expected a map of action to value");
        for (const auto& akv : skv.second) {
            const std::size_t a =
                resolve(akv.first, [&](const std::string& n) { return m.action_index(n); }, "action");
            cell(s, a, akv.second, skv.second);
        }
    }
}

} // namespace

ModelDocument parse_model(std::string_view text) {
    const YAML::Node root = load_text(text);
    if (!root.IsMap()) fail(root, "model must be a map");

    const auto states = name_list(root, "states");
    const auto actions = name_list(root, "actions");
    Mdp shell = [&] {
        try {
            return name_shell(states, actions);
        } catch (const std::invalid_argument& e) {
            fail(root, e.what());
        }
    }();

    const std::size_t n = states.size(), k = actions.size();
    std::vector<std::string> warnings;

    const YAML::Node transitions = require_map(root, "transitions");
    std::vector<std::optional<TransitionRow>> rows(n * k);
    std::vector<bool> seen_state(n, false);
    for (const auto& skv : transitions) {
        const std::size_t s =
            resolve(skv.first, [&](const std::string& nm) { return shell.state_index(nm); }, "state");
        seen_state[s] = true;
        if (!skv.second.IsMap()) fail(skv.second, "transitions of '" + states[s] + "' must be a map of action to row");
        std::optional<TransitionRow> shared;
        for (const auto& akv : skv.second) {
            const std::string where = "row (" + states[s] + ", " + akv.first.Scalar() + ")";
            TransitionRow row = to_row(probability_map(akv.second, shell, where, warnings));
            if (akv.first.Scalar() == "*") {
                shared = std::move(row);
                continue;
            }
            const std::size_t a =
                resolve(akv.first, [&](const std::string& nm) { return shell.action_index(nm); }, "action");
            rows[s * k + a] = std::move(row);
        }
        for (std::size_t a = 0; a < k; ++a) {
            if (!rows[s * k + a] && shared) rows[s * k + a] = *shared;
            if (!rows[s * k + a])
                fail(skv.second, "no row for (" + states[s] + ", " + actions[a] + ") and no '*' row");
        }
    }
    for (std::size_t s = 0; s < n; ++s)
        if (!seen_state[s]) fail(transitions, "no transitions for state '" + states[s] + "'");

    Eigen::VectorXd reward = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    if (const YAML::Node rewards = root["rewards"]) {
        if (!rewards.IsMap()) fail(rewards, "'rewards' must be a map of state to number");
        for (const auto& kv : rewards) {
            const std::size_t s =
                resolve(kv.first, [&](const std::string& nm) { return shell.state_index(nm); }, "state");
            reward[static_cast<Eigen::Index>(s)] = number(kv.second, "reward of '" + states[s] + "'");
        }
    }

    const std::vector<double> init = probability_map(require_map(root, "initial"), shell, "initial", warnings);
    const DiscountSpec discount = parse_gamma(root["gamma"], shell);

    std::map<std::string, std::string> metadata;
    if (const YAML::Node meta = root["metadata"]; meta && meta.IsMap()) {
        for (const auto& kv : meta)
            if (kv.first.IsScalar() && kv.second.IsScalar()) metadata[kv.first.Scalar()] = kv.second.Scalar();
    }

    for (const auto& kv : root) {
        const std::string key = kv.first.Scalar();
        if (key != "states" && key != "actions" && key != "transitions" && key != "rewards" && key != "initial" &&
            key != "gamma" && key != "metadata")
            fail(kv.first, "unknown key '" + key + "'");
    }

    std::vector<TransitionRow> final_rows;
    final_rows.reserve(rows.size());
    for (auto& r : rows) final_rows.push_back(std::move(*r));
    try {
        return {Mdp(states, actions, std::move(final_rows), std::move(reward),
                    Eigen::Map<const Eigen::VectorXd>(init.data(), static_cast<Eigen::Index>(n)), discount),
                std::move(warnings), std::move(metadata)};
    } catch (const std::invalid_argument& e) {
        fail(root, e.what());
    }
}

ModelDocument load_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

std::string write_model(const Mdp& m, const std::map<std::string, std::string>& metadata) {
    const std::size_t n = m.num_states(), k = m.num_actions();
    const auto& names = m.states();
    auto emit_row = [&](YAML::Emitter& out, const TransitionRow& row) {
        out << YAML::Flow << YAML::BeginMap;
        for (const auto& t : row) out << YAML::Key << names[t.target] << YAML::Value << format_double17(t.probability);
        out << YAML::EndMap;
    };

    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "states" << YAML::Value << YAML::Flow << names;
    out << YAML::Key << "actions" << YAML::Value << YAML::Flow << m.actions();

    out << YAML::Key << "transitions" << YAML::Value << YAML::BeginMap;
    for (std::size_t s = 0; s < n; ++s) {
        out << YAML::Key << names[s] << YAML::Value << YAML::BeginMap;
        bool agnostic = true;
        for (std::size_t a = 1; a < k && agnostic; ++a) agnostic = m.row(s, a) == m.row(s, 0);
        if (agnostic && k > 1) {
            out << YAML::Key << "*" << YAML::Value;
            emit_row(out, m.row(s, 0));
        } else {
            for (std::size_t a = 0; a < k; ++a) {
                out << YAML::Key << m.actions()[a] << YAML::Value;
                emit_row(out, m.row(s, a));
            }
        }
        out << YAML::EndMap;
    }
    out << YAML::EndMap;

    out << YAML::Key << "rewards" << YAML::Value << YAML::Flow << YAML::BeginMap;
    for (std::size_t s = 0; s < n; ++s)
        out << YAML::Key << names[s] << YAML::Value << format_double17(m.reward()[static_cast<Eigen::Index>(s)]);
    out << YAML::EndMap;

    out << YAML::Key << "initial" << YAML::Value << YAML::Flow << YAML::BeginMap;
    for (std::size_t s = 0; s < n; ++s) {
        const double p = m.initial()[static_cast<Eigen::Index>(s)];
        if (p != 0.0) out << YAML::Key << names[s] << YAML::Value << format_double17(p);
    }
    out << YAML::EndMap;

    out << YAML::Key << "gamma" << YAML::Value;
    std::visit(
        [&](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, EpisodicDiscount>) {
                out << "episodic";
            } else if constexpr (std::is_same_v<D, ConstantDiscount>) {
                out << format_double17(d.value);
            } else {
                out << YAML::Flow << YAML::BeginMap;
                for (std::size_t s = 0; s < n; ++s) out << YAML::Key << names[s] << YAML::Value << format_double17(d.values[s]);
                out << YAML::EndMap;
            }
        },
        m.discount());

    if (!metadata.empty()) {
        out << YAML::Key << "metadata" << YAML::Value << YAML::BeginMap;
        for (const auto& [key, value] : metadata) out << YAML::Key << key << YAML::Value << value;
        out << YAML::EndMap;
    }
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

void save_model(const std::filesystem::path& path, const Mdp& m, const std::map<std::string, std::string>& metadata) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write '" + path.string() + "'");
    file << write_model(m, metadata);
}

TabularPolicy parse_policy(std::string_view text, const Mdp& m) {
    const YAML::Node root = load_text(text);
    TabularPolicy pi = TabularPolicy::uniform(m.num_states(), m.num_actions());
    std::vector<std::vector<double>> rows(m.num_states());
    std::vector<YAML::Node> where(m.num_states());
    for_each_cell(root, m, [&](std::size_t s, std::size_t a, const YAML::Node& value, const YAML::Node& row) {
        if (rows[s].empty()) rows[s].assign(m.num_actions(), 0.0);
        const double p = number(value, "policy");
        if (p < 0.0 || p > 1.0) fail(value, "policy probability outside [0, 1]");
        rows[s][a] = p;
        where[s] = row;
    });
    std::vector<std::string> ignored;
    for (std::size_t s = 0; s < m.num_states(); ++s) {
        if (rows[s].empty()) continue;
        settle(rows[s], where[s], "policy row of '" + m.states()[s] + "'", ignored);
        for (std::size_t a = 0; a < m.num_actions(); ++a)
            pi.probs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = rows[s][a];
    }
    return pi;
}

TabularPolicy load_policy(const std::filesystem::path& path, const Mdp& m) { return parse_policy(read_file(path), m); }

SoftmaxPolicy parse_theta(std::string_view text, const Mdp& m) {
    const YAML::Node root = load_text(text);
    SoftmaxPolicy theta = SoftmaxPolicy::zeros(m.num_states(), m.num_actions());
    for_each_cell(root, m, [&](std::size_t s, std::size_t a, const YAML::Node& value, const YAML::Node&) {
        theta.theta(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = number(value, "theta");
    });
    return theta;
}

SoftmaxPolicy load_theta(const std::filesystem::path& path, const Mdp& m) { return parse_theta(read_file(path), m); }

} // namespace episteady
