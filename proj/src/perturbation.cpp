#include "episteady/perturbation.hpp"

#include "episteady/error.hpp"
#include "episteady/rollout.hpp"
#include "episteady/text.hpp"
#include "episteady/values.hpp"

#include <algorithm>
#include <cmath>

namespace episteady {

namespace {

constexpr std::uint64_t kCoinStream = 0x636f696e00000000ULL;

std::string unused_name(const std::vector<std::string>& names, const std::string& base) {
    std::string candidate = base;
    for (int i = 1; std::find(names.begin(), names.end(), candidate) != names.end(); ++i)
        candidate = base + "_" + std::to_string(i);
    return candidate;
}

TransitionRow scaled(const TransitionRow& row, double factor) {
    TransitionRow out = row;
    for (auto& t : out) t.probability *= factor;
    return out;
}

TransitionRow with_null(TransitionRow row, StateIndex null_state, double p) {
    row.push_back({null_state, p});
    return row;
}

// Base discount factors with gamma(null) = 1. Stored as a table because in recursive mode
// the null row coincides with the terminal row, so closure-based discounting would zero it.
DiscountSpec extend_discount(const Mdp& m) {
    const Eigen::VectorXd base = discount_factors(m, m.discount());
    std::vector<double> values(base.data(), base.data() + base.size());
    values.push_back(1.0);
    return PerStateDiscount{std::move(values)};
}

} // namespace

std::string_view to_string(PerturbationMode mode) {
    return mode == PerturbationMode::Single ? "single" : "recursive";
}

PerturbedMdp perturb(const Mdp& m, double eps, PerturbationMode mode) {
    if (!(eps > 0.0 && eps < 1.0))
        throw Error(ErrorCode::EpsOutOfRange, "epsilon " + format_double(eps) + " outside (0,1)");
    require_episodic(m);
    const auto closure = terminal_closure(m);
    const std::vector<bool> terminal = closure.mask(m.num_states());
    const StateIndex null_state = m.num_states();
    const std::size_t k = m.num_actions();

    std::vector<std::string> states = m.states();
    states.push_back(unused_name(states, "null"));

    const TransitionRow back = scaled(closure.shared_row, 1.0 - eps);
    const TransitionRow terminal_row = with_null(back, null_state, eps);
    const TransitionRow null_row =
        mode == PerturbationMode::Single ? closure.shared_row : with_null(back, null_state, eps);

    std::vector<TransitionRow> rows;
    rows.reserve((m.num_states() + 1) * k);
    for (StateIndex s = 0; s < m.num_states(); ++s)
        for (ActionIndex a = 0; a < k; ++a) rows.push_back(terminal[s] ? terminal_row : m.row(s, a));
    for (ActionIndex a = 0; a < k; ++a) rows.push_back(null_row);

    Eigen::VectorXd reward(m.reward().size() + 1);
    reward << m.reward(), 0.0;
    Distribution initial(m.initial().size() + 1);
    initial << m.initial(), 0.0;

    return {Mdp(std::move(states), m.actions(), std::move(rows), reward, initial, extend_discount(m)), eps, mode,
            null_state};
}

PerturbedMdp epsilon_perturb(const Mdp& m, double eps) { return perturb(m, eps, PerturbationMode::Single); }

PerturbedMdp recursive_perturb(const Mdp& m, double eps) { return perturb(m, eps, PerturbationMode::Recursive); }

Distribution recover_stationary(const Distribution& rho_plus, StateIndex null_state) {
    const auto null = static_cast<Eigen::Index>(null_state);
    if (null >= rho_plus.size()) throw Error(ErrorCode::DimensionMismatch, "null state outside the distribution");
    const double null_mass = rho_plus[null];
    if (null_mass >= 1.0 - 1e-12)
        throw Error(ErrorCode::DegenerateNullMass, "null state holds mass " + format_double(null_mass));
    Distribution out(rho_plus.size() - 1);
    out << rho_plus.head(null), rho_plus.tail(rho_plus.size() - null - 1);
    return out / (1.0 - null_mass);
}

TabularPolicy extend_policy(const TabularPolicy& pi) {
    TabularPolicy out{Eigen::MatrixXd(pi.probs.rows() + 1, pi.probs.cols())};
    out.probs.topRows(pi.probs.rows()) = pi.probs;
    out.probs.row(pi.probs.rows()).setConstant(1.0 / static_cast<double>(pi.probs.cols()));
    return out;
}

double check_value_preservation(const Mdp& m, const PerturbedMdp& p, const TabularPolicy& pi) {
    const auto base = solve_q(m, pi, EpisodicDiscount{});
    const auto perturbed = solve_q(p.model, extend_policy(pi), p.model.discount());
    const auto n = static_cast<Eigen::Index>(m.num_states());
    return (base.q - perturbed.q.topRows(n)).cwiseAbs().maxCoeff();
}

CoupledRun couple_trajectory(const std::vector<StateIndex>& zeta, const std::vector<bool>& terminal,
                             const std::vector<bool>& insert_after, StateIndex null_state) {
    CoupledRun run;
    run.zeta = zeta;
    run.null_state = null_state;
    for (std::size_t t = 0; t < zeta.size(); ++t) {
        run.zeta_plus.push_back(zeta[t]);
        if (terminal[zeta[t]] && t < insert_after.size() && insert_after[t]) run.zeta_plus.push_back(null_state);
    }
    std::size_t nulls = 0;
    for (std::size_t t = 0; t < zeta.size(); ++t) {
        if (t > 0 && run.zeta_plus[t - 1] == null_state) ++nulls;
        run.delta.push_back(nulls);
        run.z.push_back(zeta[t - nulls]);
    }
    return run;
}

CoupledRun coupled_sample(const Mdp& m, const TabularPolicy& pi, double eps, std::uint64_t seed,
                          std::size_t horizon) {
    if (!(eps >= 0.0 && eps < 1.0))
        throw Error(ErrorCode::EpsOutOfRange, "epsilon " + format_double(eps) + " outside [0,1)");
    const auto report = require_episodic(m);
    std::vector<bool> terminal(m.num_states(), false);
    for (auto s : report.terminal_set) terminal[s] = true;

    const auto base = rollout(m, pi, seed, horizon);
    Rng coins(seed, kCoinStream);
    std::vector<bool> insert_after(base.states.size(), false);
    for (std::size_t t = 0; t < base.states.size(); ++t)
        if (terminal[base.states[t]]) insert_after[t] = coins.uniform() < eps;
    return couple_trajectory(base.states, terminal, insert_after, m.num_states());
}

void write_coupled_csv(std::ostream& out, const CoupledRun& run, const std::vector<std::string>& base_names) {
    auto name = [&](StateIndex s) { return s == run.null_state ? std::string("null") : base_names[s]; };
    out << "t,base,perturbed\n";
    for (std::size_t t = 0; t < run.zeta.size(); ++t)
        out << t << ',' << name(run.zeta[t]) << ',' << name(run.zeta_plus[t]) << '\n';
}

} // namespace episteady
