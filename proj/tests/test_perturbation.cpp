#include "episteady/chain.hpp"
#include "episteady/error.hpp"
#include "episteady/fixtures.hpp"
#include "episteady/perturbation.hpp"
#include "episteady/rollout.hpp"
#include "episteady/values.hpp"

#include <doctest.h>

#include <sstream>

using namespace episteady;
namespace fx = episteady::fixtures;

namespace {

double row_entry(const TransitionRow& row, StateIndex target) {
    for (const auto& t : row)
        if (t.target == target) return t.probability;
    return 0.0;
}

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidModel;
}

} // namespace

TEST_CASE("single perturbation table") {
    const auto p = epsilon_perturb(fx::toy_loop2(), 0.5);
    CHECK(p.null_state == 2);
    CHECK(p.model.states().back() == "null");
    CHECK(p.model.row(0, 0) == TransitionRow{{1, 0.5}, {2, 0.5}});
    CHECK(p.model.row(1, 0) == TransitionRow{{0, 1.0}});
    CHECK(p.model.row(2, 0) == TransitionRow{{1, 1.0}});
    CHECK(p.model.reward()[2] == 0.0);
    CHECK(p.model.initial()[2] == 0.0);
    CHECK(validate_mdp(p.model).empty());
    const auto report = episodic_report(p.model);
    CHECK(report.episodic());
    CHECK(report.terminal_set == std::vector<StateIndex>{0});
}

TEST_CASE("recursive perturbation table and dwell") {
    const auto single = epsilon_perturb(fx::toy_loop2(), 0.5);
    const auto p = recursive_perturb(fx::toy_loop2(), 0.5);
    CHECK(p.model.row(2, 0) == TransitionRow{{1, 0.5}, {2, 0.5}});
    for (StateIndex s = 0; s < 2; ++s) CHECK(p.model.row(s, 0) == single.model.row(s, 0));

    // Expected null visits per episode through the discounted-visit solve at gamma = 1.
    for (double eps : {0.5, 0.9, 0.95}) {
        const auto q = recursive_perturb(fx::toy_loop2(), eps);
        const auto visits = expected_episode_visits(induce_chain(q.model, TabularPolicy::uniform(3, 1)), {0});
        CHECK(visits[2] == doctest::Approx(eps / (1.0 - eps)).epsilon(1e-12));
    }
}

TEST_CASE("null name avoids collisions and discount tables are extended") {
    Mdp m({"null", "x"}, {"go"}, {{{1, 1.0}}, {{0, 1.0}}}, Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 0),
          ConstantDiscount{0.9});
    const auto p = epsilon_perturb(m, 0.2);
    CHECK(p.model.states().back() == "null_1");
    const auto* d = std::get_if<PerStateDiscount>(&p.model.discount());
    REQUIRE(d);
    CHECK(d->values == std::vector<double>{0.9, 0.9, 1.0});
    const auto loop = epsilon_perturb(fx::toy_loop2(), 0.5);
    const auto* e = std::get_if<PerStateDiscount>(&loop.model.discount());
    REQUIRE(e);
    CHECK(e->values == std::vector<double>{0.0, 1.0, 1.0});
}

TEST_CASE("perturbation preconditions") {
    CHECK(code_of([] { epsilon_perturb(fx::toy_loop2(), 1.0); }) == ErrorCode::EpsOutOfRange);
    CHECK(code_of([] { epsilon_perturb(fx::toy_loop2(), 0.0); }) == ErrorCode::EpsOutOfRange);
    Mdp bad({"t0", "x"}, {"a", "b"}, {{{1, 1.0}}, {{0, 1.0}}, {{0, 1.0}}, {{0, 1.0}}}, Eigen::Vector2d::Zero(),
            Eigen::Vector2d(1, 0));
    CHECK(code_of([&] { epsilon_perturb(bad, 0.5); }) == ErrorCode::NotEpisodic);
}

TEST_CASE("stationary recovery") {
    const Distribution rec = recover_stationary(Eigen::Vector3d(0.4, 0.4, 0.2), 2);
    CHECK((rec - Eigen::Vector2d(0.5, 0.5)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(recover_stationary(Eigen::Vector3d(0.3, 0.7, 0.0), 2) == Eigen::Vector2d(0.3, 0.7));
    CHECK(code_of([] { recover_stationary(Eigen::Vector3d(0.0, 0.0, 1.0), 2); }) == ErrorCode::DegenerateNullMass);
}

TEST_CASE("value preservation on the toy models") {
    CHECK(check_value_preservation(fx::toy_loop2(), epsilon_perturb(fx::toy_loop2(), 0.5), TabularPolicy::uniform(2, 1)) <=
          1e-12);
    CHECK(check_value_preservation(fx::toy_branch(), epsilon_perturb(fx::toy_branch(), 0.3), fx::branch_policy(0.5)) <=
          1e-12);
}

TEST_CASE("random suite: recovery, value preservation, closure and co-prime lengths") {
    Rng rng(31);
    for (int i = 0; i < 60; ++i) {
        const auto m = fx::random_episodic_mdp(rng);
        const auto pi = fx::random_policy(rng, m.num_states(), m.num_actions());
        const auto base = stationary_distribution(induce_chain(m, pi));
        const auto terminal = terminal_closure(m).terminal_set;
        for (double eps : {0.1, 0.5, 0.9})
            for (auto mode : {PerturbationMode::Single, PerturbationMode::Recursive}) {
                const auto p = perturb(m, eps, mode);
                const auto chain = induce_chain(p.model, extend_policy(pi));
                const auto plus = stationary_distribution(chain);
                CHECK((recover_stationary(plus.rho, p.null_state) - base.rho).cwiseAbs().maxCoeff() <= 1e-10);
                CHECK(check_value_preservation(m, p, pi) <= 1e-10);
                const auto report = episodic_report(p.model);
                CHECK(report.episodic());
                if (mode == PerturbationMode::Single) {
                    CHECK(report.terminal_set == terminal);
                } else {
                    // The recursive null row equals the terminal row.
                    auto with_null = terminal;
                    with_null.push_back(p.null_state);
                    CHECK(report.terminal_set == with_null);
                }
                CHECK(plus.aperiodic);
                if (mode == PerturbationMode::Single) {
                    const auto base_lengths = coprime_episode_lengths(induce_chain(m, pi), terminal, 64);
                    REQUIRE_FALSE(base_lengths.lengths.empty());
                    const std::size_t shortest = base_lengths.lengths.front();
                    const auto lengths = coprime_episode_lengths(chain, terminal, shortest + 1);
                    CHECK(lengths.coprime_pair == std::pair<std::size_t, std::size_t>{shortest, shortest + 1});
                }
            }
    }
}

TEST_CASE("coupling reproduces the worked snapshot") {
    // zeta = s0..s5 with s0,s1,s2,s4 terminal; nulls after s0 and s2 only.
    const std::vector<StateIndex> zeta{0, 1, 2, 3, 4, 5};
    const std::vector<bool> terminal{true, true, true, false, true, false};
    const std::vector<bool> insert{true, false, true, false, false, false};
    const auto run = couple_trajectory(zeta, terminal, insert, 6);
    CHECK(run.zeta_plus == std::vector<StateIndex>{0, 6, 1, 2, 6, 3, 4, 5});
    CHECK(run.delta == std::vector<std::size_t>{0, 0, 1, 1, 1, 2});
    CHECK(run.z == std::vector<StateIndex>{0, 1, 1, 2, 3, 3});
}

TEST_CASE("coupled sampling") {
    const auto loop = fx::toy_loop2();
    const auto pi = TabularPolicy::uniform(2, 1);
    const auto none = coupled_sample(loop, pi, 0.0, 3, 50);
    CHECK(none.zeta_plus == none.zeta);
    CHECK(none.z == none.zeta);
    CHECK(std::all_of(none.delta.begin(), none.delta.end(), [](std::size_t d) { return d == 0; }));

    const std::size_t horizon = 1000000;
    const auto run = coupled_sample(loop, pi, 0.5, 3, horizon);
    CHECK(rollout(loop, pi, 3, horizon).states == run.zeta);
    Eigen::Vector2d z_freq = Eigen::Vector2d::Zero();
    Eigen::Vector3d plus_freq = Eigen::Vector3d::Zero();
    for (std::size_t t = 0; t <= horizon; ++t) {
        z_freq[static_cast<Eigen::Index>(run.z[t])] += 1;
        plus_freq[static_cast<Eigen::Index>(run.zeta_plus[t])] += 1;
        if (run.zeta_plus[t] != run.null_state) CHECK(run.z[t] == run.zeta_plus[t]);
    }
    Eigen::Vector2d z_at_base = Eigen::Vector2d::Zero();
    for (std::size_t t = 0; t <= horizon; ++t)
        if (run.zeta_plus[t] != run.null_state) z_at_base[static_cast<Eigen::Index>(run.z[t])] += 1;
    z_freq /= static_cast<double>(horizon + 1);
    plus_freq /= static_cast<double>(horizon + 1);
    z_at_base /= z_at_base.sum();
    // At null slots z repeats the state that follows the null, so unconditionally z carries
    // rho+(a0) + rho+(null) = 0.6 on a0; restricted to base slots it matches rho.
    CHECK(total_variation(z_at_base, Eigen::Vector2d(0.5, 0.5)) <= 0.02);
    CHECK(total_variation(z_freq, Eigen::Vector2d(0.4, 0.6)) <= 0.02);
    CHECK(total_variation(plus_freq, Eigen::Vector3d(0.4, 0.4, 0.2)) <= 0.02);

    std::ostringstream csv;
    write_coupled_csv(csv, coupled_sample(loop, pi, 0.5, 3, 3), loop.states());
    CHECK(csv.str().rfind("t,base,perturbed\n0,t0,", 0) == 0);
}

TEST_CASE("coupling identity holds on random models") {
    Rng rng(8);
    for (int i = 0; i < 10; ++i) {
        const auto m = fx::random_episodic_mdp(rng);
        const auto pi = fx::random_policy(rng, m.num_states(), m.num_actions());
        const auto run = coupled_sample(m, pi, 0.4, static_cast<std::uint64_t>(i), 5000);
        for (std::size_t t = 0; t < run.z.size(); ++t)
            if (run.zeta_plus[t] != run.null_state) CHECK(run.z[t] == run.zeta_plus[t]);
    }
}
