#include "episteady/values.hpp"

#include "episteady/error.hpp"
#include "episteady/text.hpp"
#include "linalg.hpp"

#include <algorithm>
#include <cmath>

namespace episteady {

ValueTable solve_q(const Mdp& m, const TabularPolicy& pi, const DiscountSpec& d) {
    const auto chain = induce_chain(m, pi);
    const Eigen::VectorXd gamma = discount_factors(m, d);
    const auto n = static_cast<Eigen::Index>(m.num_states());

    // V = M (R + diag(gamma) V)  <=>  (I - M diag(gamma)) V = M R.
    SparseMatrix system = -(chain.matrix * gamma.asDiagonal());
    for (Eigen::Index i = 0; i < n; ++i) system.coeffRef(i, i) += 1.0;
    const Eigen::VectorXd b = chain.matrix * m.reward();
    const Eigen::VectorXd v = detail::solve_linear(system, b, ErrorCode::SingularSystem, "value system");

    const Eigen::VectorXd backed_up = m.reward() + gamma.cwiseProduct(v);
    ValueTable table{Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(m.num_actions())), v, d};
    for (StateIndex s = 0; s < m.num_states(); ++s)
        for (ActionIndex act = 0; act < m.num_actions(); ++act) {
            double q = 0.0;
            for (const auto& t : m.row(s, act)) q += t.probability * backed_up[static_cast<Eigen::Index>(t.target)];
            table.q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(act)) = q;
        }
    table.v = (table.q.cwiseProduct(pi.probs)).rowwise().sum();
    return table;
}

double bellman_residual(const Mdp& m, const TabularPolicy& pi, const ValueTable& table) {
    const Eigen::VectorXd gamma = discount_factors(m, table.discount);
    const Eigen::VectorXd v = (table.q.cwiseProduct(pi.probs)).rowwise().sum();
    const Eigen::VectorXd backed_up = m.reward() + gamma.cwiseProduct(v);
    double worst = 0.0;
    for (StateIndex s = 0; s < m.num_states(); ++s)
        for (ActionIndex a = 0; a < m.num_actions(); ++a) {
            double q = 0.0;
            for (const auto& t : m.row(s, a)) q += t.probability * backed_up[static_cast<Eigen::Index>(t.target)];
            worst = std::max(worst, std::abs(q - table.q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a))));
        }
    return worst;
}

double episodic_performance(const Mdp& m, const TabularPolicy& pi) {
    const auto report = require_episodic(m);
    const auto table = solve_q(m, pi, EpisodicDiscount{});
    const double j = table.v[static_cast<Eigen::Index>(report.terminal_set.front())];
    for (auto s : report.terminal_set)
        if (std::abs(table.v[static_cast<Eigen::Index>(s)] - j) > 1e-10 * std::max(1.0, std::abs(j)))
            throw Error(ErrorCode::InternalInconsistency,
                        "terminal values differ: " + format_double(j) + " vs " +
                            format_double(table.v[static_cast<Eigen::Index>(s)]) + " at " + m.states()[s]);
    return j;
}

double steady_state_performance(const StationaryReport& report, const Eigen::VectorXd& rewards) {
    if (rewards.size() != report.rho.size())
        throw Error(ErrorCode::DimensionMismatch, "reward table size differs from the distribution");
    return report.rho.dot(rewards);
}

double PerformancePair::residual() const { return std::abs(j_epi - j_avg * expected_length); }

PerformancePair performance_pair(const Mdp& m, const TabularPolicy& pi) {
    const auto episodic = require_episodic(m);
    const auto chain = induce_chain(m, pi);
    const auto stationary = stationary_distribution(chain);
    PerformancePair out;
    out.j_epi = episodic_performance(m, pi);
    out.j_avg = steady_state_performance(stationary, m.reward());
    out.expected_length = expected_episode_length(chain, stationary, episodic.terminal_set);
    return out;
}

double performance_identity_residual(const Mdp& m, const TabularPolicy& pi) {
    return performance_pair(m, pi).residual();
}

} // namespace episteady
