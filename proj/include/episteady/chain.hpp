#pragma once

#include "episteady/mdp.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace episteady {

struct StationaryReport {
    Distribution rho;                     // zeros off the recurrent class
    std::vector<StateIndex> reachable;    // closure of support(start)
    std::vector<StateIndex> recurrent;    // the single closed class inside `reachable`
    bool irreducible_on_reachable = false;
    bool aperiodic = false;
    std::size_t period = 0;
    double residual = 0.0;                // max |(rho M - rho)(s)|
};

enum class LimitOutcome { Converged, NotConvergedWithin };

struct LimitResult {
    LimitOutcome outcome = LimitOutcome::NotConvergedWithin;
    Distribution distribution; // converged value, or the last iterate
    Distribution previous;     // iterate one step before `distribution`
    std::size_t steps = 0;
    double change_tv = 0.0;    // TV(distribution, previous)

    bool converged() const { return outcome == LimitOutcome::Converged; }
};

struct EpisodeLengths {
    std::vector<std::size_t> lengths; // achievable episode lengths up to the bound
    std::optional<std::pair<std::size_t, std::size_t>> coprime_pair;
};

std::vector<StateIndex> reachable_set(const MarkovChain& c);

/// Direct linear solve on the closed class reachable from the start distribution.
/// Throws Error(NotIrreducible) when the reachable set holds more than one closed class.
StationaryReport stationary_distribution(const MarkovChain& c);

/// (1/T) * sum_{t<T} rho^(t); the iterative cross-check for the direct solve.
Distribution cesaro_average(const MarkovChain& c, std::size_t steps);

LimitResult limiting_distribution(const MarkovChain& c, double tol, std::size_t horizon);

double mean_recurrence_time(const StationaryReport& report, StateIndex s);

/// 1 / rho(terminal set), cross-checked against the absorbing-chain hitting time.
/// Throws Error(InternalInconsistency) if the two disagree by more than 1e-8.
double expected_episode_length(const MarkovChain& c, const StationaryReport& report,
                               const std::vector<StateIndex>& terminal_set);
double expected_episode_length(const MarkovChain& c, const std::vector<StateIndex>& terminal_set);

double expected_episode_length_stationary(const StationaryReport& report,
                                          const std::vector<StateIndex>& terminal_set);

/// Expected steps to hit the terminal set, counted from t=1, via the fundamental matrix.
double expected_episode_length_absorbing(const MarkovChain& c, const std::vector<StateIndex>& terminal_set);

/// Expected gamma-discounted visits per episode. Index 0 is the first state after the
/// start state; the closing terminal visit is counted. Not normalized.
Eigen::VectorXd expected_episode_visits(const MarkovChain& c, const std::vector<StateIndex>& terminal_set,
                                        double gamma = 1.0);

EpisodeLengths coprime_episode_lengths(const MarkovChain& c, const std::vector<StateIndex>& terminal_set,
                                       std::size_t bound);

/// Normalized episode-wise visitation distribution. For gamma_c = 1 it equals the
/// stationary distribution of the policy chain.
Distribution visitation_distribution(const Mdp& m, const TabularPolicy& pi, double gamma_c);

} // namespace episteady
