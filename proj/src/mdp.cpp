#include "episteady/mdp.hpp"

#include "episteady/error.hpp"
#include "episteady/text.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <unordered_set>

namespace episteady {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotEpisodic: return "NotEpisodic";
    case ErrorCode::NotIrreducible: return "NotIrreducible";
    case ErrorCode::UnreachableState: return "UnreachableState";
    case ErrorCode::InternalInconsistency: return "InternalInconsistency";
    case ErrorCode::Divergent: return "Divergent";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::EpsOutOfRange: return "EpsOutOfRange";
    case ErrorCode::DegenerateNullMass: return "DegenerateNullMass";
    case ErrorCode::NoValidSamples: return "NoValidSamples";
    }
    return "Unknown";
}

namespace {

void require_unique(const std::vector<std::string>& names, const char* what) {
    std::unordered_set<std::string> seen;
    for (const auto& n : names) {
        if (!seen.insert(n).second)
            throw std::invalid_argument(std::string("duplicate ") + what + " name '" + n + "'");
    }
}

std::optional<std::size_t> find_name(const std::vector<std::string>& names, const std::string& name) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names.begin());
}

} // namespace

TransitionRow canonical_row(TransitionRow row) {
    std::sort(row.begin(), row.end(),
              [](const Transition& a, const Transition& b) { return a.target < b.target; });
    TransitionRow out;
    out.reserve(row.size());
    for (const auto& t : row) {
        if (!out.empty() && out.back().target == t.target)
            out.back().probability += t.probability;
        else
            out.push_back(t);
    }
    std::erase_if(out, [](const Transition& t) { return t.probability == 0.0; });
    return out;
}

bool rows_equal(const TransitionRow& lhs, const TransitionRow& rhs, double tol) {
    std::size_t i = 0, j = 0;
    while (i < lhs.size() || j < rhs.size()) {
        if (j == rhs.size() || (i < lhs.size() && lhs[i].target < rhs[j].target)) {
            if (std::abs(lhs[i].probability) > tol) return false;
            ++i;
        } else if (i == lhs.size() || rhs[j].target < lhs[i].target) {
            if (std::abs(rhs[j].probability) > tol) return false;
            ++j;
        } else {
            if (std::abs(lhs[i].probability - rhs[j].probability) > tol) return false;
            ++i;
            ++j;
        }
    }
    return true;
}

Mdp::Mdp(std::vector<std::string> states, std::vector<std::string> actions,
         std::vector<TransitionRow> rows, Eigen::VectorXd reward, Distribution initial,
         DiscountSpec discount)
    : states_(std::move(states)), actions_(std::move(actions)), rows_(std::move(rows)),
      reward_(std::move(reward)), initial_(std::move(initial)), discount_(std::move(discount)) {
    const std::size_t n = states_.size();
    if (n == 0) throw std::invalid_argument("model needs at least one state");
    if (actions_.empty()) throw std::invalid_argument("model needs at least one action");
    require_unique(states_, "state");
    require_unique(actions_, "action");
    if (rows_.size() != n * actions_.size())
        throw std::invalid_argument("expected one transition row per (state, action)");
    if (static_cast<std::size_t>(reward_.size()) != n)
        throw std::invalid_argument("reward vector size differs from state count");
    if (static_cast<std::size_t>(initial_.size()) != n)
        throw std::invalid_argument("initial distribution size differs from state count");
    if (auto* per_state = std::get_if<PerStateDiscount>(&discount_);
        per_state && per_state->values.size() != n)
        throw std::invalid_argument("per-state discount table size differs from state count");
    for (auto& row : rows_) {
        for (const auto& t : row)
            if (t.target >= n) throw std::invalid_argument("transition target out of range");
        row = canonical_row(std::move(row));
    }
}

std::optional<StateIndex> Mdp::state_index(const std::string& name) const {
    return find_name(states_, name);
}

std::optional<ActionIndex> Mdp::action_index(const std::string& name) const {
    return find_name(actions_, name);
}

bool Mdp::operator==(const Mdp& other) const {
    return states_ == other.states_ && actions_ == other.actions_ && rows_ == other.rows_ &&
           reward_ == other.reward_ && initial_ == other.initial_ && discount_ == other.discount_;
}

TabularPolicy TabularPolicy::uniform(std::size_t num_states, std::size_t num_actions) {
    return {Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(num_states),
                                      static_cast<Eigen::Index>(num_actions),
                                      1.0 / static_cast<double>(num_actions))};
}

std::vector<bool> TerminalClosure::mask(std::size_t num_states) const {
    std::vector<bool> out(num_states, false);
    for (auto s : terminal_set) out[s] = true;
    return out;
}

std::vector<std::string> validate_mdp(const Mdp& m) {
    std::vector<std::string> violations;
    for (StateIndex s = 0; s < m.num_states(); ++s) {
        for (ActionIndex a = 0; a < m.num_actions(); ++a) {
            const std::string where = "(" + m.states()[s] + "," + m.actions()[a] + ")";
            double sum = 0.0;
            for (const auto& t : m.row(s, a)) {
                sum += t.probability;
                if (!(t.probability >= 0.0) || !std::isfinite(t.probability))
                    violations.push_back("row " + where + " has invalid probability " +
                                         format_double(t.probability) + " for target " +
                                         m.states()[t.target]);
            }
            if (!(std::abs(sum - 1.0) <= kRowTolerance))
                violations.push_back("row " + where + " sums to " + format_double(sum));
        }
        if (!std::isfinite(m.reward()[s]))
            violations.push_back("reward of " + m.states()[s] + " is not finite");
    }
    double mass = 0.0;
    for (StateIndex s = 0; s < m.num_states(); ++s) {
        const double p = m.initial()[s];
        mass += p;
        if (!(p >= 0.0) || !std::isfinite(p))
            violations.push_back("initial probability of " + m.states()[s] + " is " + format_double(p));
    }
    if (!(std::abs(mass - 1.0) <= kRowTolerance))
        violations.push_back("initial distribution sums to " + format_double(mass));

    if (auto* c = std::get_if<ConstantDiscount>(&m.discount())) {
        if (!(c->value >= 0.0 && c->value < 1.0))
            violations.push_back("constant discount " + format_double(c->value) + " outside [0,1)");
    } else if (auto* p = std::get_if<PerStateDiscount>(&m.discount())) {
        for (StateIndex s = 0; s < m.num_states(); ++s)
            if (!(p->values[s] >= 0.0 && p->values[s] <= 1.0))
                violations.push_back("discount of " + m.states()[s] + " is " +
                                     format_double(p->values[s]) + ", outside [0,1]");
    }
    return violations;
}

std::vector<std::string> validate_policy(const Mdp& m, const TabularPolicy& pi) {
    std::vector<std::string> violations;
    if (static_cast<std::size_t>(pi.probs.rows()) != m.num_states() ||
        static_cast<std::size_t>(pi.probs.cols()) != m.num_actions()) {
        violations.push_back("policy table has shape " + std::to_string(pi.probs.rows()) + "x" +
                             std::to_string(pi.probs.cols()) + ", model needs " +
                             std::to_string(m.num_states()) + "x" + std::to_string(m.num_actions()));
        return violations;
    }
    for (StateIndex s = 0; s < m.num_states(); ++s) {
        double sum = 0.0;
        for (ActionIndex a = 0; a < m.num_actions(); ++a) {
            const double p = pi.probs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
            sum += p;
            if (!(p >= 0.0))
                violations.push_back("policy entry (" + m.states()[s] + "," + m.actions()[a] +
                                     ") is " + format_double(p));
        }
        if (!(std::abs(sum - 1.0) <= kRowTolerance))
            violations.push_back("policy row " + m.states()[s] + " sums to " + format_double(sum));
    }
    return violations;
}

TerminalClosure terminal_closure(const Mdp& m) {
    TerminalClosure out;
    std::vector<StateIndex> support;
    for (StateIndex s = 0; s < m.num_states(); ++s)
        if (m.initial()[s] > 0.0) support.push_back(s);
    if (support.empty()) return out;

    const TransitionRow& r0 = m.row(support.front(), 0);
    for (auto s : support)
        for (ActionIndex a = 0; a < m.num_actions(); ++a)
            if (!rows_equal(m.row(s, a), r0)) return out;

    out.homogeneity_ok = true;
    out.shared_row = r0;
    for (StateIndex s = 0; s < m.num_states(); ++s) {
        bool matches = true;
        for (ActionIndex a = 0; a < m.num_actions() && matches; ++a) matches = rows_equal(m.row(s, a), r0);
        if (matches) out.terminal_set.push_back(s);
    }
    return out;
}

FinitenessResult check_finiteness(const Mdp& m, const std::vector<StateIndex>& terminal_set) {
    const std::size_t n = m.num_states();
    std::vector<bool> terminal(n, false);
    for (auto s : terminal_set) terminal[s] = true;

    // Largest action-closed set avoiding the terminals.
    std::vector<bool> inside(n);
    for (StateIndex s = 0; s < n; ++s) inside[s] = !terminal[s];
    bool changed = true;
    while (changed) {
        changed = false;
        for (StateIndex s = 0; s < n; ++s) {
            if (!inside[s]) continue;
            bool some_action_stays = false;
            for (ActionIndex a = 0; a < m.num_actions() && !some_action_stays; ++a) {
                const auto& row = m.row(s, a);
                some_action_stays = std::all_of(row.begin(), row.end(), [&](const Transition& t) {
                    return t.probability <= 0.0 || inside[t.target];
                });
            }
            if (!some_action_stays) {
                inside[s] = false;
                changed = true;
            }
        }
    }

    // States reachable from the terminal set when every action is allowed.
    std::vector<bool> reached(n, false);
    std::deque<StateIndex> queue(terminal_set.begin(), terminal_set.end());
    for (auto s : terminal_set) reached[s] = true;
    while (!queue.empty()) {
        const StateIndex s = queue.front();
        queue.pop_front();
        for (ActionIndex a = 0; a < m.num_actions(); ++a)
            for (const auto& t : m.row(s, a))
                if (t.probability > 0.0 && !reached[t.target]) {
                    reached[t.target] = true;
                    queue.push_back(t.target);
                }
    }

    FinitenessResult out;
    for (StateIndex s = 0; s < n; ++s)
        if (inside[s] && reached[s]) out.witness.push_back(s);
    out.ok = out.witness.empty();
    return out;
}

EpisodicReport episodic_report(const Mdp& m) {
    EpisodicReport report;
    const auto closure = terminal_closure(m);
    report.terminal_set = closure.terminal_set;
    report.homogeneity_ok = closure.homogeneity_ok;
    if (closure.homogeneity_ok) {
        auto finite = check_finiteness(m, closure.terminal_set);
        report.finiteness_ok = finite.ok;
        report.finiteness_witness = std::move(finite.witness);
    }
    return report;
}

EpisodicReport require_episodic(const Mdp& m) {
    auto report = episodic_report(m);
    if (!report.homogeneity_ok)
        throw Error(ErrorCode::NotEpisodic, "initial states do not share one action-agnostic transition row");
    if (!report.finiteness_ok) {
        std::string names;
        for (auto s : report.finiteness_witness) names += (names.empty() ? "" : ",") + m.states()[s];
        throw Error(ErrorCode::NotEpisodic, "some policy can avoid the terminal set forever from {" + names + "}");
    }
    return report;
}

Eigen::VectorXd discount_factors(const Mdp& m, const DiscountSpec& spec) {
    const auto n = static_cast<Eigen::Index>(m.num_states());
    return std::visit(
        [&](const auto& d) -> Eigen::VectorXd {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, EpisodicDiscount>) {
                const auto closure = terminal_closure(m);
                if (!closure.homogeneity_ok)
                    throw Error(ErrorCode::NotEpisodic, "episodic discounting needs a homogeneous terminal set");
                Eigen::VectorXd g = Eigen::VectorXd::Ones(n);
                for (auto s : closure.terminal_set) g[static_cast<Eigen::Index>(s)] = 0.0;
                return g;
            } else if constexpr (std::is_same_v<T, ConstantDiscount>) {
                return Eigen::VectorXd::Constant(n, d.value);
            } else {
                if (d.values.size() != m.num_states())
                    throw Error(ErrorCode::DimensionMismatch, "per-state discount table size");
                return Eigen::Map<const Eigen::VectorXd>(d.values.data(), n);
            }
        },
        spec);
}

MarkovChain induce_chain(const Mdp& m, const TabularPolicy& pi) {
    if (static_cast<std::size_t>(pi.probs.rows()) != m.num_states() ||
        static_cast<std::size_t>(pi.probs.cols()) != m.num_actions())
        throw Error(ErrorCode::DimensionMismatch, "policy shape does not match the model");
    const auto n = static_cast<Eigen::Index>(m.num_states());
    std::vector<Eigen::Triplet<double>> triplets;
    for (StateIndex s = 0; s < m.num_states(); ++s)
        for (ActionIndex a = 0; a < m.num_actions(); ++a) {
            const double w = pi(s, a);
            if (w == 0.0) continue;
            for (const auto& t : m.row(s, a))
                triplets.emplace_back(static_cast<int>(s), static_cast<int>(t.target), w * t.probability);
        }
    MarkovChain chain;
    chain.matrix.resize(n, n);
    chain.matrix.setFromTriplets(triplets.begin(), triplets.end());
    chain.matrix.makeCompressed();
    chain.states = m.states();
    chain.start = m.initial();
    return chain;
}

Distribution step_marginal(const MarkovChain& c, const Distribution& rho) {
    if (rho.size() != c.matrix.rows())
        throw Error(ErrorCode::DimensionMismatch, "distribution has " + std::to_string(rho.size()) +
                                                       " entries, chain has " + std::to_string(c.matrix.rows()));
    return c.matrix.transpose() * rho;
}

double total_variation(const Distribution& p, const Distribution& q) {
    if (p.size() != q.size()) throw Error(ErrorCode::DimensionMismatch, "total variation of unequal sizes");
    return 0.5 * (p - q).cwiseAbs().sum();
}

} // namespace episteady
