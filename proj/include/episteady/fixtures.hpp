#pragma once

#include "episteady/mdp.hpp"
#include "episteady/random.hpp"

#include <cstdint>

namespace episteady::fixtures {

/// {t0, a0}, one action, t0 -> a0 -> t0, reward 1 on entering a0. Period 2.
Mdp toy_loop2();

/// {t0, d, tW, tL}, actions {a1, a2}; t0/tW/tL -> d, d -a1-> tW, d -a2-> tL, reward 1 on tW.
Mdp toy_branch();

/// Policy on toy_branch choosing a1 at d with probability p1 (uniform elsewhere).
TabularPolicy branch_policy(double p1);

/// t0 -> c1 -> c2 -> c3 -> {tW via a1, tL via a2}: every episode has length 4.
Mdp corridor4();

struct RandomModelOptions {
    std::size_t min_states = 3;
    std::size_t max_states = 12;
    std::size_t min_actions = 1;
    std::size_t max_actions = 4;
    double edge_density = 0.5; // chance that a given target is in a row's support
    double extra_terminal_rate = 0.2;
};

/// Random episodic MDP: state 0 is the start, a few more states share its row, rows have
/// random sparse supports. Draws are repeated until both episodic conditions hold.
Mdp random_episodic_mdp(Rng& rng, const RandomModelOptions& options = {});

/// Strictly positive random policy.
TabularPolicy random_policy(Rng& rng, std::size_t num_states, std::size_t num_actions);

/// Parameters uniform on [-scale, scale].
Eigen::MatrixXd random_theta(Rng& rng, std::size_t num_states, std::size_t num_actions, double scale = 2.0);

} // namespace episteady::fixtures
