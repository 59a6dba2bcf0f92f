#include "episteady/fixtures.hpp"
#include "episteady/model_io.hpp"
#include "episteady/perturbation.hpp"

#include <doctest.h>

#include <string>

using namespace episteady;
namespace fx = episteady::fixtures;

namespace {

const std::string kData = EPISTEADY_TEST_DATA;

ParseError parse_error_of(const std::string& text) {
    try {
        parse_model(text);
    } catch (const ParseError& e) {
        return e;
    }
    FAIL("expected a parse error");
    return ParseError("", 0, 0);
}

const char* kLoop = R"(states: [t0, a0]
actions: [go]
transitions:
  t0: {go: {a0: 1}}
  a0: {go: {t0: 1}}
rewards: {a0: 1}
initial: {t0: 1}
)";

} // namespace

TEST_CASE("fixture files parse to the in-code fixtures") {
    CHECK(load_model(kData + "/toy_loop2.yaml").model == fx::toy_loop2());
    CHECK(load_model(kData + "/toy_branch.yaml").model == fx::toy_branch());
}

TEST_CASE("JSON documents parse like YAML") {
    const std::string json = R"({"states": ["t0", "a0"], "actions": ["go"],
        "transitions": {"t0": {"go": {"a0": 1}}, "a0": {"go": {"t0": 1.0}}},
        "rewards": {"a0": 1}, "initial": {"t0": 1}, "gamma": "episodic"})";
    CHECK(parse_model(json).model == fx::toy_loop2());
}

TEST_CASE("write then parse is the identity on random models and discounts") {
    Rng rng(77);
    for (int i = 0; i < 40; ++i) {
        const Mdp base = fx::random_episodic_mdp(rng);
        const std::size_t n = base.num_states();
        std::vector<double> per_state(n);
        for (auto& g : per_state) g = rng.uniform();
        Eigen::VectorXd reward(static_cast<Eigen::Index>(n));
        for (auto& r : reward) r = rng.uniform() * 10.0 - 5.0;
        const std::vector<DiscountSpec> discounts{EpisodicDiscount{}, ConstantDiscount{rng.uniform()},
                                                  PerStateDiscount{per_state}};
        for (const auto& d : discounts) {
            const Mdp m(base.states(), base.actions(), base.rows(), reward, base.initial(), d);
            const std::string text = write_model(m);
            const ModelDocument back = parse_model(text);
            CHECK(back.model == m);
            CHECK(back.warnings.empty());
        }
        const PerturbedMdp p = recursive_perturb(base, 0.3 + 0.5 * rng.uniform());
        CHECK(parse_model(write_model(p.model)).model == p.model);
    }
}

TEST_CASE("written numbers carry 17 significant digits") {
    const Mdp m(fx::toy_loop2().states(), {"go"}, fx::toy_loop2().rows(), Eigen::Vector2d(0.1, 1.0),
                Eigen::Vector2d(1.0, 0.0));
    CHECK(write_model(m).find("0.10000000000000001") != std::string::npos);
}

TEST_CASE("metadata is kept aside and does not affect the model") {
    const ModelDocument doc = parse_model(std::string(kLoop) + "metadata: {epsilon: 0.95, note: hello}\n");
    CHECK(doc.model == fx::toy_loop2());
    CHECK(doc.metadata.at("epsilon") == "0.95");
    CHECK(doc.metadata.at("note") == "hello");
}

TEST_CASE("rows within 1e-9 of one are renormalized with a warning") {
    const ModelDocument doc = parse_model(R"(states: [t0, a0, b0]
actions: [go]
transitions:
  t0: {go: {a0: 0.5000000004, b0: 0.5}}
  a0: {go: {t0: 1}}
  b0: {go: {t0: 1}}
initial: {t0: 1}
)");
    REQUIRE(doc.warnings.size() == 1);
    CHECK(doc.warnings[0].find("row (t0, go)") != std::string::npos);
    double sum = 0.0;
    for (const auto& t : doc.model.row(0, 0)) sum += t.probability;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("rows further than 1e-9 from one are rejected with their position") {
    const ParseError e = parse_error_of(R"(states: [t0, a0]
actions: [go]
transitions:
  t0: {go: {a0: 0.999999998}}
  a0: {go: {t0: 1}}
initial: {t0: 1}
)");
    CHECK(e.line() == 4);
    CHECK(e.column() == 12);
    CHECK(std::string(e.what()).find("row (t0, go)") != std::string::npos);
}

TEST_CASE("unknown names and keys are rejected") {
    SUBCASE("target state") {
        const ParseError e = parse_error_of(R"(states: [t0, a0]
actions: [go]
transitions:
  t0: {go: {zz: 1}}
  a0: {go: {t0: 1}}
initial: {t0: 1}
)");
        CHECK(e.line() == 4);
        CHECK(std::string(e.what()).find("unknown state 'zz'") != std::string::npos);
    }
    SUBCASE("action") {
        const ParseError e = parse_error_of(R"(states: [t0, a0]
actions: [go]
transitions:
  t0: {stop: {a0: 1}}
  a0: {go: {t0: 1}}
initial: {t0: 1}
)");
        CHECK(std::string(e.what()).find("unknown action 'stop'") != std::string::npos);
    }
    SUBCASE("top-level key") {
        CHECK(std::string(parse_error_of(std::string(kLoop) + "extra: 1\n").what()).find("unknown key 'extra'") !=
              std::string::npos);
    }
    SUBCASE("incomplete gamma map") {
        CHECK(parse_error_of(std::string(kLoop) + "gamma: {t0: 1}\n").line() > 0);
    }
}

TEST_CASE("missing rows and syntax errors are reported") {
    CHECK(std::string(parse_error_of(R"(states: [t0, a0]
actions: [go, stay]
transitions:
  t0: {go: {a0: 1}}
  a0: {"*": {t0: 1}}
initial: {t0: 1}
)").what()).find("no row for (t0, stay)") != std::string::npos);

    const ParseError syntax = parse_error_of("states: [t0, a0\nactions: [go]\n");
    CHECK(syntax.line() > 0);
    CHECK(parse_error_of("states: [t0]\nactions: [go]\ntransitions: {t0: {go: {t0: 1}}}\ninitial: {t0: 1}\n"
                         "gamma: 1.5\n")
              .line() == 5);
}

TEST_CASE("gamma accepts episodic, a number, or a per-state map") {
    const std::string base = kLoop;
    CHECK(std::holds_alternative<EpisodicDiscount>(parse_model(base).model.discount()));
    CHECK(std::get<ConstantDiscount>(parse_model(base + "gamma: 0.9\n").model.discount()).value == 0.9);
    const auto per = std::get<PerStateDiscount>(parse_model(base + "gamma: {t0: 0, a0: 0.5}\n").model.discount());
    CHECK(per.values == std::vector<double>{0.0, 0.5});
}

TEST_CASE("an explicit action row overrides the '*' row") {
    const Mdp m = parse_model(R"(states: [t0, a0, b0]
actions: [x, y]
transitions:
  t0: {"*": {a0: 1}, y: {b0: 1}}
  a0: {"*": {t0: 1}}
  b0: {"*": {t0: 1}}
initial: {t0: 1}
)").model;
    CHECK(m.row(0, 0) == TransitionRow{{1, 1.0}});
    CHECK(m.row(0, 1) == TransitionRow{{2, 1.0}});
}

TEST_CASE("policy and theta files") {
    const Mdp m = fx::toy_branch();
    const TabularPolicy pi = parse_policy("d: {a1: 0.8, a2: 0.2}\n", m);
    CHECK(pi.probs(1, 0) == 0.8);
    CHECK(pi.probs(0, 0) == 0.5);
    CHECK_THROWS_AS(parse_policy("d: {a1: 0.8, a2: 0.1}\n", m), ParseError);
    CHECK_THROWS_AS(parse_policy("q: {a1: 1}\n", m), ParseError);

    const SoftmaxPolicy theta = parse_theta("d: {a1: 0.5}\n", m);
    CHECK(theta.theta(1, 0) == 0.5);
    CHECK(theta.theta.cwiseAbs().sum() == 0.5);
}
