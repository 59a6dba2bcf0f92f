#pragma once

#include "episteady/chain.hpp"
#include "episteady/mdp.hpp"
#include "episteady/random.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

namespace episteady {

/// Sampling view of a model under a fixed policy.
class Simulator {
  public:
    Simulator(const Mdp& m, const TabularPolicy& pi);

    StateIndex initial_state(Rng& rng) const;
    ActionIndex action(StateIndex s, Rng& rng) const;
    StateIndex next_state(StateIndex s, ActionIndex a, Rng& rng) const;
    bool terminal(StateIndex s) const { return terminal_[s]; }
    const Mdp& model() const { return *model_; }

  private:
    const Mdp* model_;
    std::vector<double> initial_;
    std::vector<std::vector<double>> policy_rows_;
    std::vector<bool> terminal_;
};

struct Trajectory {
    std::vector<StateIndex> states;         // steps + 1 entries, states[0] ~ initial
    std::vector<ActionIndex> actions;       // actions[t] taken at states[t]
    std::vector<double> rewards;            // rewards[t] = R(states[t])
    std::vector<std::size_t> episode_boundaries; // t with states[t] terminal
    std::vector<std::size_t> episode_lengths;    // gaps between consecutive boundaries
    std::uint64_t seed = 0;
};

/// Rollout of `steps` transitions on stream (seed, 0).
Trajectory rollout(const Mdp& m, const TabularPolicy& pi, std::uint64_t seed, std::size_t steps);

Distribution exact_marginal(const MarkovChain& c, std::size_t t);

/// Frequency of s_t over K rollouts; rollout k draws from stream (seed, k).
Distribution empirical_marginal(const Mdp& m, const TabularPolicy& pi, std::size_t t, std::size_t k,
                                std::uint64_t seed, std::size_t threads = 0);

struct ConvergenceProfile {
    std::vector<double> tv; // tv[t] = TV(rho^(t), rho), t = 0..horizon
    std::optional<std::size_t> first_passage;
    double ael = 0.0;
};

ConvergenceProfile convergence_profile(const Mdp& m, const TabularPolicy& pi, std::size_t horizon, double tol);

/// Columns t,t_in_ael,tv.
void write_profile_csv(std::ostream& out, const ConvergenceProfile& profile);

/// Run-length encoding of the state sequence; columns start,state,length.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory, const std::vector<std::string>& names);

/// Round-robin chain s0 -> s1 -> ... -> s{n-1} -> s0 with a single action and zero reward.
Mdp state_sweeping_env(std::size_t n);

struct ThreeAelReport {
    double expected_length = 0.0; // E[T] of the base model under the policy
    double epsilon = 0.0;
    std::size_t n = 0;            // round(E[T])
    std::size_t t_star = 0;       // 3n
    double tv = 0.0;
    bool pass = false;
};

/// Recursive perturbation with eps = 1 - 1/E[T], then the equal mix of the exact marginals
/// at 3n-1 and 3n, restricted to base states, against the base stationary distribution.
/// An explicit epsilon of 0 skips the perturbation and uses the single marginal at 3n.
/// Without a policy the uniform policy is used.
ThreeAelReport three_ael_experiment(const Mdp& m, double tol, const std::optional<TabularPolicy>& pi = std::nullopt,
                                    std::optional<double> epsilon = std::nullopt);

} // namespace episteady
