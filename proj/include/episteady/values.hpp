#pragma once

#include "episteady/chain.hpp"
#include "episteady/mdp.hpp"

namespace episteady {

struct ValueTable {
    Eigen::MatrixXd q; // num_states x num_actions
    Eigen::VectorXd v; // v(s) = sum_a pi(s,a) q(s,a)
    DiscountSpec discount;
};

/// Direct solve of Q(s,a) = sum_s' T(s'|s,a) (R(s') + gamma(s') V(s')).
/// Throws Error(SingularSystem) when the discounted system has no unique solution.
ValueTable solve_q(const Mdp& m, const TabularPolicy& pi, const DiscountSpec& d);

/// Largest |Q(s,a) - sum_s' T (R + gamma V)| over the table.
double bellman_residual(const Mdp& m, const TabularPolicy& pi, const ValueTable& table);

/// Value of the lowest-index terminal state under episodic discounting.
/// Throws Error(InternalInconsistency) if terminal values disagree by more than 1e-10.
double episodic_performance(const Mdp& m, const TabularPolicy& pi);

double steady_state_performance(const StationaryReport& report, const Eigen::VectorXd& rewards);

struct PerformancePair {
    double j_epi = 0.0;
    double j_avg = 0.0;
    double expected_length = 0.0;

    double residual() const;
};

/// Episode-wise value, stationary average reward and expected episode length, each from
/// its own solver path.
PerformancePair performance_pair(const Mdp& m, const TabularPolicy& pi);

/// |J_epi - J_avg * E[T]|.
double performance_identity_residual(const Mdp& m, const TabularPolicy& pi);

} // namespace episteady
