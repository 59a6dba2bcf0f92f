#include "episteady/rollout.hpp"

#include "episteady/error.hpp"
#include "episteady/parallel.hpp"
#include "episteady/perturbation.hpp"
#include "episteady/text.hpp"

#include <cmath>
#include <stdexcept>

namespace episteady {

Simulator::Simulator(const Mdp& m, const TabularPolicy& pi)
    : model_(&m), initial_(m.initial().data(), m.initial().data() + m.initial().size()),
      terminal_(terminal_closure(m).mask(m.num_states())) {
    if (static_cast<std::size_t>(pi.probs.rows()) != m.num_states() ||
        static_cast<std::size_t>(pi.probs.cols()) != m.num_actions())
        throw Error(ErrorCode::DimensionMismatch, "policy shape does not match the model");
    policy_rows_.resize(m.num_states());
    for (StateIndex s = 0; s < m.num_states(); ++s) {
        const Eigen::VectorXd row = pi.probs.row(static_cast<Eigen::Index>(s)).transpose();
        policy_rows_[s].assign(row.data(), row.data() + row.size());
    }
}

StateIndex Simulator::initial_state(Rng& rng) const { return rng.categorical(initial_); }

ActionIndex Simulator::action(StateIndex s, Rng& rng) const {
    if (policy_rows_[s].size() == 1) return 0;
    return rng.categorical(policy_rows_[s]);
}

StateIndex Simulator::next_state(StateIndex s, ActionIndex a, Rng& rng) const {
    const auto& row = model_->row(s, a);
    if (row.size() == 1) return row.front().target;
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& t : row) {
        acc += t.probability;
        if (u < acc) return t.target;
    }
    return row.back().target;
}

Trajectory rollout(const Mdp& m, const TabularPolicy& pi, std::uint64_t seed, std::size_t steps) {
    const Simulator sim(m, pi);
    Rng rng(seed, 0);
    Trajectory out;
    out.seed = seed;
    out.states.reserve(steps + 1);
    out.actions.reserve(steps);
    StateIndex s = sim.initial_state(rng);
    for (std::size_t t = 0;; ++t) {
        out.states.push_back(s);
        out.rewards.push_back(m.reward()[static_cast<Eigen::Index>(s)]);
        if (sim.terminal(s)) {
            if (!out.episode_boundaries.empty()) out.episode_lengths.push_back(t - out.episode_boundaries.back());
            out.episode_boundaries.push_back(t);
        }
        if (t == steps) break;
        const ActionIndex a = sim.action(s, rng);
        out.actions.push_back(a);
        s = sim.next_state(s, a, rng);
    }
    return out;
}

Distribution exact_marginal(const MarkovChain& c, std::size_t t) {
    Distribution rho = c.start;
    for (std::size_t i = 0; i < t; ++i) rho = step_marginal(c, rho);
    return rho;
}

Distribution empirical_marginal(const Mdp& m, const TabularPolicy& pi, std::size_t t, std::size_t k,
                                std::uint64_t seed, std::size_t threads) {
    if (k == 0) throw std::invalid_argument("empirical_marginal needs at least one rollout");
    const Simulator sim(m, pi);
    std::vector<StateIndex> landed(k);
    parallel_for(k, threads, [&](std::size_t i) {
        Rng rng(seed, i);
        StateIndex s = sim.initial_state(rng);
        for (std::size_t step = 0; step < t; ++step) s = sim.next_state(s, sim.action(s, rng), rng);
        landed[i] = s;
    });
    Distribution freq = Distribution::Zero(static_cast<Eigen::Index>(m.num_states()));
    for (auto s : landed) freq[static_cast<Eigen::Index>(s)] += 1.0;
    return freq / static_cast<double>(k);
}

ConvergenceProfile convergence_profile(const Mdp& m, const TabularPolicy& pi, std::size_t horizon, double tol) {
    const auto closure = terminal_closure(m);
    if (!closure.homogeneity_ok) throw Error(ErrorCode::NotEpisodic, "model has no homogeneous terminal set");
    const auto chain = induce_chain(m, pi);
    const auto stationary = stationary_distribution(chain);
    ConvergenceProfile out;
    out.ael = expected_episode_length(chain, stationary, closure.terminal_set);
    Distribution rho = chain.start;
    for (std::size_t t = 0; t <= horizon; ++t) {
        if (t > 0) rho = step_marginal(chain, rho);
        out.tv.push_back(total_variation(rho, stationary.rho));
        if (!out.first_passage && out.tv.back() <= tol) out.first_passage = t;
    }
    return out;
}

void write_profile_csv(std::ostream& out, const ConvergenceProfile& profile) {
    out << "t,t_in_ael,tv\n";
    for (std::size_t t = 0; t < profile.tv.size(); ++t)
        out << t << ',' << format_double(static_cast<double>(t) / profile.ael) << ','
            << format_double(profile.tv[t]) << '\n';
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory, const std::vector<std::string>& names) {
    out << "start,state,length\n";
    std::size_t start = 0;
    for (std::size_t t = 1; t <= trajectory.states.size(); ++t)
        if (t == trajectory.states.size() || trajectory.states[t] != trajectory.states[start]) {
            out << start << ',' << names[trajectory.states[start]] << ',' << (t - start) << '\n';
            start = t;
        }
}

Mdp state_sweeping_env(std::size_t n) {
    if (n < 2) throw std::invalid_argument("state sweeping needs at least two states");
    std::vector<std::string> states;
    std::vector<TransitionRow> rows;
    for (std::size_t i = 0; i < n; ++i) {
        states.push_back("s" + std::to_string(i));
        rows.push_back({{(i + 1) % n, 1.0}});
    }
    Distribution initial = Distribution::Zero(static_cast<Eigen::Index>(n));
    initial[0] = 1.0;
    return Mdp(std::move(states), {"go"}, std::move(rows), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)),
               initial);
}

ThreeAelReport three_ael_experiment(const Mdp& m, double tol, const std::optional<TabularPolicy>& pi,
                                    std::optional<double> epsilon) {
    const auto policy = pi ? *pi : TabularPolicy::uniform(m.num_states(), m.num_actions());
    const auto episodic = require_episodic(m);
    const auto base_chain = induce_chain(m, policy);
    const auto base_stationary = stationary_distribution(base_chain);

    ThreeAelReport report;
    report.expected_length = expected_episode_length(base_chain, base_stationary, episodic.terminal_set);
    report.epsilon = epsilon ? *epsilon : 1.0 - 1.0 / report.expected_length;
    report.n = static_cast<std::size_t>(std::llround(report.expected_length));
    report.t_star = 3 * report.n;

    Distribution mixed;
    if (report.epsilon == 0.0) {
        mixed = exact_marginal(base_chain, report.t_star);
    } else {
        const auto p = recursive_perturb(m, report.epsilon);
        const auto chain = induce_chain(p.model, extend_policy(policy));
        const Distribution before = exact_marginal(chain, report.t_star - 1);
        const Distribution at = step_marginal(chain, before);
        const Distribution both = 0.5 * (before + at);
        const double base_mass = 1.0 - both[static_cast<Eigen::Index>(p.null_state)];
        mixed = both.head(static_cast<Eigen::Index>(m.num_states())) / base_mass;
    }
    report.tv = total_variation(mixed, base_stationary.rho);
    report.pass = report.tv <= tol;
    return report;
}

} // namespace episteady
