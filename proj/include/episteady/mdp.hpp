#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace episteady {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;

/// Probability row over states. Dense because every consumer does linear algebra on it.
using Distribution = Eigen::VectorXd;

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Tolerance used for row sums and for matching transition rows.
inline constexpr double kRowTolerance = 1e-12;

struct Transition {
    StateIndex target;
    double probability;

    bool operator==(const Transition&) const = default;
};

/// Sparse transition row, sorted by target with duplicate targets merged.
using TransitionRow = std::vector<Transition>;

// Discounting function variants.
struct EpisodicDiscount {
    bool operator==(const EpisodicDiscount&) const = default;
};
struct ConstantDiscount {
    double value;
    bool operator==(const ConstantDiscount&) const = default;
};
struct PerStateDiscount {
    std::vector<double> values;
    bool operator==(const PerStateDiscount&) const = default;
};
using DiscountSpec = std::variant<EpisodicDiscount, ConstantDiscount, PerStateDiscount>;

/// Finite decision model with state-based rewards (received on entering a state).
///
/// Immutable after construction. The constructor rejects structural problems
/// (wrong sizes, out-of-range targets, duplicate names) with std::invalid_argument;
/// numeric problems such as rows that do not sum to one are reported by validate_mdp.
class Mdp {
  public:
    Mdp(std::vector<std::string> states, std::vector<std::string> actions,
        std::vector<TransitionRow> rows, Eigen::VectorXd reward, Distribution initial,
        DiscountSpec discount = EpisodicDiscount{});

    std::size_t num_states() const { return states_.size(); }
    std::size_t num_actions() const { return actions_.size(); }

    const std::vector<std::string>& states() const { return states_; }
    const std::vector<std::string>& actions() const { return actions_; }
    std::optional<StateIndex> state_index(const std::string& name) const;
    std::optional<ActionIndex> action_index(const std::string& name) const;

    const TransitionRow& row(StateIndex s, ActionIndex a) const { return rows_[s * actions_.size() + a]; }
    const std::vector<TransitionRow>& rows() const { return rows_; }
    const Eigen::VectorXd& reward() const { return reward_; }
    const Distribution& initial() const { return initial_; }
    const DiscountSpec& discount() const { return discount_; }

    bool operator==(const Mdp& other) const;

  private:
    std::vector<std::string> states_;
    std::vector<std::string> actions_;
    std::vector<TransitionRow> rows_;
    Eigen::VectorXd reward_;
    Distribution initial_;
    DiscountSpec discount_;
};

/// Canonicalizes a row: sorts by target, merges duplicates, drops exact zeros.
TransitionRow canonical_row(TransitionRow row);

/// Tolerance-aware equality of two canonical rows.
bool rows_equal(const TransitionRow& lhs, const TransitionRow& rhs, double tol = kRowTolerance);

struct TabularPolicy {
    Eigen::MatrixXd probs; // num_states x num_actions

    static TabularPolicy uniform(std::size_t num_states, std::size_t num_actions);
    double operator()(StateIndex s, ActionIndex a) const { return probs(s, a); }
};

struct MarkovChain {
    SparseMatrix matrix;
    std::vector<std::string> states;
    Distribution start;

    std::size_t size() const { return states.size(); }
};

struct TerminalClosure {
    std::vector<StateIndex> terminal_set;
    bool homogeneity_ok = false;
    TransitionRow shared_row; // the row every terminal state uses (empty when not homogeneous)

    std::vector<bool> mask(std::size_t num_states) const;
};

struct FinitenessResult {
    bool ok = false;
    std::vector<StateIndex> witness;
};

struct EpisodicReport {
    std::vector<StateIndex> terminal_set;
    bool homogeneity_ok = false;
    bool finiteness_ok = false;
    std::vector<StateIndex> finiteness_witness;

    bool episodic() const { return homogeneity_ok && finiteness_ok; }
};

/// Empty when every invariant holds; otherwise one human-readable line per violation.
std::vector<std::string> validate_mdp(const Mdp& m);
std::vector<std::string> validate_policy(const Mdp& m, const TabularPolicy& pi);

TerminalClosure terminal_closure(const Mdp& m);

/// Action-closed safety fixed point restricted to states reachable from the terminal set.
FinitenessResult check_finiteness(const Mdp& m, const std::vector<StateIndex>& terminal_set);

EpisodicReport episodic_report(const Mdp& m);

/// Throws Error(NotEpisodic) unless both episodic conditions hold.
EpisodicReport require_episodic(const Mdp& m);

/// Per-state discount factors for the given spec; Episodic uses the terminal closure.
Eigen::VectorXd discount_factors(const Mdp& m, const DiscountSpec& spec);

MarkovChain induce_chain(const Mdp& m, const TabularPolicy& pi);

Distribution step_marginal(const MarkovChain& c, const Distribution& rho);

double total_variation(const Distribution& p, const Distribution& q);

} // namespace episteady
