#include "episteady/fixtures.hpp"

#include <algorithm>

namespace episteady::fixtures {

namespace {

TransitionRow to(StateIndex s) { return {{s, 1.0}}; }

TransitionRow random_row(Rng& rng, std::size_t n, double density, const std::vector<bool>& must_reach_one_of) {
    TransitionRow row;
    bool hits_required = false;
    for (StateIndex s = 0; s < n; ++s)
        if (rng.bernoulli(density)) {
            row.push_back({s, rng.uniform(0.05, 1.0)});
            hits_required = hits_required || must_reach_one_of[s];
        }
    if (!hits_required) {
        std::vector<StateIndex> options;
        for (StateIndex s = 0; s < n; ++s)
            if (must_reach_one_of[s]) options.push_back(s);
        row.push_back({options[rng.below(options.size())], rng.uniform(0.05, 1.0)});
    }
    double sum = 0.0;
    for (const auto& t : row) sum += t.probability;
    for (auto& t : row) t.probability /= sum;
    return canonical_row(std::move(row));
}

// Every state reachable from state 0 under some policy, so finiteness covers the whole model.
bool all_reachable(const Mdp& m) {
    std::vector<bool> seen(m.num_states(), false);
    std::vector<StateIndex> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        const StateIndex s = stack.back();
        stack.pop_back();
        for (ActionIndex a = 0; a < m.num_actions(); ++a)
            for (const auto& t : m.row(s, a))
                if (!seen[t.target]) {
                    seen[t.target] = true;
                    stack.push_back(t.target);
                }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

} // namespace

Mdp toy_loop2() {
    return Mdp({"t0", "a0"}, {"go"}, {to(1), to(0)}, Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(1.0, 0.0));
}

Mdp toy_branch() {
    // States t0=0, d=1, tW=2, tL=3; actions a1, a2.
    std::vector<TransitionRow> rows{to(1), to(1), to(2), to(3), to(1), to(1), to(1), to(1)};
    return Mdp({"t0", "d", "tW", "tL"}, {"a1", "a2"}, std::move(rows), Eigen::Vector4d(0.0, 0.0, 1.0, 0.0),
               Eigen::Vector4d(1.0, 0.0, 0.0, 0.0));
}

TabularPolicy branch_policy(double p1) {
    auto pi = TabularPolicy::uniform(4, 2);
    pi.probs.row(1) << p1, 1.0 - p1;
    return pi;
}

Mdp corridor4() {
    // t0=0, c1=1, c2=2, c3=3, tW=4, tL=5.
    std::vector<TransitionRow> rows{to(1), to(1), to(2), to(2), to(3), to(3),
                                    to(4), to(5), to(1), to(1), to(1), to(1)};
    Eigen::VectorXd reward = Eigen::VectorXd::Zero(6);
    reward[4] = 1.0;
    Eigen::VectorXd initial = Eigen::VectorXd::Zero(6);
    initial[0] = 1.0;
    return Mdp({"t0", "c1", "c2", "c3", "tW", "tL"}, {"a1", "a2"}, std::move(rows), reward, initial);
}

Mdp random_episodic_mdp(Rng& rng, const RandomModelOptions& options) {
    for (;;) {
        const std::size_t n = options.min_states + rng.below(options.max_states - options.min_states + 1);
        const std::size_t k = options.min_actions + rng.below(options.max_actions - options.min_actions + 1);

        std::vector<bool> terminal(n, false), open(n, false), any(n, true);
        terminal[0] = true;
        for (StateIndex s = 1; s < n; ++s) terminal[s] = rng.bernoulli(options.extra_terminal_rate);
        for (StateIndex s = 0; s < n; ++s) open[s] = !terminal[s];
        if (std::none_of(open.begin(), open.end(), [](bool b) { return b; })) continue;

        const TransitionRow r0 = random_row(rng, n, options.edge_density, open);
        std::vector<TransitionRow> rows(n * k);
        for (StateIndex s = 0; s < n; ++s)
            for (ActionIndex a = 0; a < k; ++a)
                rows[s * k + a] = terminal[s] ? r0
                                              : random_row(rng, n, options.edge_density,
                                                           rng.bernoulli(0.5) ? terminal : any);

        Eigen::VectorXd reward(static_cast<Eigen::Index>(n));
        for (Eigen::Index s = 0; s < reward.size(); ++s) reward[s] = rng.uniform(-1.0, 1.0);
        Eigen::VectorXd initial = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        initial[0] = 1.0;

        std::vector<std::string> states, actions;
        for (std::size_t s = 0; s < n; ++s) states.push_back("s" + std::to_string(s));
        for (std::size_t a = 0; a < k; ++a) actions.push_back("a" + std::to_string(a));
        Mdp m(std::move(states), std::move(actions), std::move(rows), reward, initial);
        if (episodic_report(m).episodic() && all_reachable(m)) return m;
    }
}

TabularPolicy random_policy(Rng& rng, std::size_t num_states, std::size_t num_actions) {
    TabularPolicy pi{Eigen::MatrixXd(static_cast<Eigen::Index>(num_states), static_cast<Eigen::Index>(num_actions))};
    for (Eigen::Index s = 0; s < pi.probs.rows(); ++s) {
        for (Eigen::Index a = 0; a < pi.probs.cols(); ++a) pi.probs(s, a) = rng.uniform(0.05, 1.0);
        pi.probs.row(s) /= pi.probs.row(s).sum();
    }
    return pi;
}

Eigen::MatrixXd random_theta(Rng& rng, std::size_t num_states, std::size_t num_actions, double scale) {
    Eigen::MatrixXd theta(static_cast<Eigen::Index>(num_states), static_cast<Eigen::Index>(num_actions));
    for (Eigen::Index s = 0; s < theta.rows(); ++s)
        for (Eigen::Index a = 0; a < theta.cols(); ++a) theta(s, a) = rng.uniform(-scale, scale);
    return theta;
}

} // namespace episteady::fixtures
