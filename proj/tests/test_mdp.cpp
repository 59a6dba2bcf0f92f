#include "episteady/error.hpp"
#include "episteady/fixtures.hpp"
#include "episteady/mdp.hpp"

#include <doctest.h>

using namespace episteady;
namespace fx = episteady::fixtures;

namespace {

Mdp loop2_with_t0_row(TransitionRow row) {
    return Mdp({"t0", "a0"}, {"go"}, {std::move(row), {{0, 1.0}}}, Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 0));
}

} // namespace

TEST_CASE("validation accepts the toy models and cites a short row") {
    CHECK(validate_mdp(fx::toy_loop2()).empty());
    CHECK(validate_mdp(fx::toy_branch()).empty());
    const auto violations = validate_mdp(loop2_with_t0_row({{1, 0.9}}));
    REQUIRE(violations.size() == 1);
    CHECK(violations[0] == "row (t0,go) sums to 0.9");
}

TEST_CASE("validation reports bad initial mass, rewards and discounts") {
    Mdp m({"x", "y"}, {"a"}, {{{1, 1.0}}, {{0, 1.0}}}, Eigen::Vector2d(0, std::nan("")), Eigen::Vector2d(0.5, 0.4),
          ConstantDiscount{1.0});
    const auto v = validate_mdp(m);
    CHECK(v.size() == 3);
}

TEST_CASE("constructor rejects structural errors") {
    CHECK_THROWS_AS(Mdp({"a", "a"}, {"x"}, {{{0, 1.0}}, {{0, 1.0}}}, Eigen::Vector2d::Zero(), Eigen::Vector2d(1, 0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(Mdp({"a"}, {"x"}, {{{3, 1.0}}}, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(Mdp({"a"}, {"x"}, {}, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)), std::invalid_argument);
}

TEST_CASE("terminal closure on the toy models") {
    const auto loop = terminal_closure(fx::toy_loop2());
    CHECK(loop.homogeneity_ok);
    CHECK(loop.terminal_set == std::vector<StateIndex>{0});

    const auto branch = terminal_closure(fx::toy_branch());
    CHECK(branch.terminal_set == std::vector<StateIndex>{0, 2, 3});

    auto base = fx::toy_branch();
    auto rows = base.rows();
    rows[2 * 2 + 0] = {{2, 1.0}};
    rows[2 * 2 + 1] = {{2, 1.0}};
    const Mdp altered(base.states(), base.actions(), rows, base.reward(), base.initial());
    CHECK(terminal_closure(altered).terminal_set == std::vector<StateIndex>{0, 3});
}

TEST_CASE("homogeneity fails when initial rows differ by action") {
    Mdp m({"t0", "x"}, {"a", "b"}, {{{1, 1.0}}, {{0, 1.0}}, {{0, 1.0}}, {{0, 1.0}}}, Eigen::Vector2d::Zero(),
          Eigen::Vector2d(1, 0));
    const auto c = terminal_closure(m);
    CHECK_FALSE(c.homogeneity_ok);
    CHECK(c.terminal_set.empty());
    CHECK_THROWS_AS(require_episodic(m), Error);
}

TEST_CASE("finiteness fixed point") {
    CHECK(check_finiteness(fx::toy_loop2(), {0}).ok);
    // a0 may move to x, which can loop on itself forever.
    Mdp m({"t0", "a0", "x"}, {"stay", "leave"},
          {{{1, 1.0}}, {{1, 1.0}}, {{0, 0.5}, {2, 0.5}}, {{0, 1.0}}, {{2, 1.0}}, {{0, 1.0}}},
          Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(1, 0, 0));
    const auto f = check_finiteness(m, terminal_closure(m).terminal_set);
    CHECK_FALSE(f.ok);
    CHECK(f.witness == std::vector<StateIndex>{2});
    try {
        require_episodic(m);
        FAIL("expected NotEpisodic");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotEpisodic);
    }
}

TEST_CASE("an avoiding loop that no terminal reaches does not break finiteness") {
    Mdp m({"t0", "a0", "x"}, {"go"}, {{{1, 1.0}}, {{0, 1.0}}, {{2, 1.0}}}, Eigen::Vector3d::Zero(),
          Eigen::Vector3d(1, 0, 0));
    CHECK(check_finiteness(m, {0}).ok);
}

TEST_CASE("induce_chain and step_marginal") {
    const auto branch = induce_chain(fx::toy_branch(), fx::branch_policy(0.5));
    CHECK(branch.matrix.coeff(1, 2) == doctest::Approx(0.5));
    CHECK(branch.matrix.coeff(1, 3) == doctest::Approx(0.5));
    CHECK(induce_chain(fx::toy_branch(), fx::branch_policy(0.9)).matrix.coeff(1, 2) == doctest::Approx(0.9));

    const auto loop = induce_chain(fx::toy_loop2(), TabularPolicy::uniform(2, 1));
    CHECK(loop.matrix.coeff(0, 1) == 1.0);
    CHECK(loop.matrix.coeff(1, 0) == 1.0);
    CHECK(step_marginal(loop, Eigen::Vector2d(1, 0)) == Eigen::Vector2d(0, 1));
    CHECK(step_marginal(loop, Eigen::Vector2d(0.5, 0.5)) == Eigen::Vector2d(0.5, 0.5));

    const Eigen::VectorXd two = step_marginal(branch, step_marginal(branch, branch.start));
    CHECK(two.isApprox(Eigen::Vector4d(0, 0, 0.5, 0.5)));
    CHECK_THROWS_AS(step_marginal(branch, Eigen::Vector2d(1, 0)), Error);
}

TEST_CASE("state-sweeping style ring passes the finiteness check") {
    std::vector<std::string> names;
    std::vector<TransitionRow> rows;
    for (std::size_t i = 0; i < 20; ++i) {
        names.push_back("s" + std::to_string(i));
        rows.push_back({{(i + 1) % 20, 1.0}});
    }
    Eigen::VectorXd init = Eigen::VectorXd::Zero(20);
    init[0] = 1;
    const Mdp ring(names, {"go"}, rows, Eigen::VectorXd::Zero(20), init);
    CHECK(episodic_report(ring).episodic());
}

TEST_CASE("random models: chain rows are stochastic and closure is idempotent") {
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        const auto m = fx::random_episodic_mdp(rng);
        const auto pi = fx::random_policy(rng, m.num_states(), m.num_actions());
        CHECK(validate_mdp(m).empty());
        const auto c = induce_chain(m, pi);
        for (Eigen::Index s = 0; s < c.matrix.rows(); ++s) CHECK(std::abs(c.matrix.row(s).sum() - 1.0) <= 1e-12);

        const auto closure = terminal_closure(m);
        REQUIRE(closure.homogeneity_ok);
        CHECK(terminal_closure(m).terminal_set == closure.terminal_set);
        for (StateIndex s = 0; s < m.num_states(); ++s)
            if (m.initial()[static_cast<Eigen::Index>(s)] > 0)
                CHECK(std::find(closure.terminal_set.begin(), closure.terminal_set.end(), s) != closure.terminal_set.end());

        Distribution rho = c.start;
        for (int t = 0; t < 100; ++t) {
            rho = step_marginal(c, rho);
            CHECK(rho.minCoeff() >= 0.0);
        }
        CHECK(std::abs(rho.sum() - 1.0) <= 1e-10);
    }
}

TEST_CASE("episodic discount factors") {
    const auto g = discount_factors(fx::toy_branch(), EpisodicDiscount{});
    CHECK(g == Eigen::Vector4d(0, 1, 0, 0));
    CHECK(discount_factors(fx::toy_loop2(), ConstantDiscount{0.9}) == Eigen::Vector2d(0.9, 0.9));
}
