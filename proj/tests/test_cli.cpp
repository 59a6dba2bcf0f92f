#include "cli.hpp"

#include "episteady/model_io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace episteady;

namespace {

const std::string kData = EPISTEADY_TEST_DATA;

struct Result {
    int code;
    std::string out;
    std::string err;
    std::map<std::string, std::string> kv;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Result r{cli::run(args, out, err), out.str(), err.str(), {}};
    std::istringstream lines(r.out);
    for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) r.kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "episteady_cli_tests";
    fs::create_directories(dir);
    return dir / name;
}

double num(const Result& r, const std::string& key) { return std::stod(r.kv.at(key)); }

} // namespace

TEST_CASE("analyze reports the loop's steady state") {
    const Result r = run({"analyze", kData + "/toy_loop2.yaml"});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(r.kv.at("terminal_set") == "t0");
    CHECK(r.kv.at("rho") == "t0:0.5,a0:0.5");
    CHECK(r.kv.at("period") == "2");
    CHECK(num(r, "expected_length") == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(num(r, "identity_residual") < 1e-9);
}

TEST_CASE("analyze exit codes") {
    const Result bad = run({"analyze", kData + "/malformed_row.yaml"});
    CHECK(bad.code == cli::kExitParse);
    CHECK(bad.err.find("row (t0, go)") != std::string::npos);
    CHECK(bad.err.find("line 4") != std::string::npos);

    CHECK(run({"analyze", kData + "/nonhomogeneous.yaml"}).code == cli::kExitNotEpisodic);
    CHECK(run({"analyze", kData + "/does_not_exist.yaml"}).code == cli::kExitParse);
    CHECK(run({"analyze"}).code == cli::kExitUsage);
    CHECK(run({"frobnicate"}).code == cli::kExitUsage);
}

TEST_CASE("analyze accepts a policy file") {
    const fs::path policy = scratch("branch_policy.yaml");
    std::ofstream(policy) << "d: {a1: 0.8, a2: 0.2}\n";
    const Result r = run({"analyze", kData + "/toy_branch.yaml", "--policy", policy.string()});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(num(r, "j_epi") == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("perturb writes the null state and re-parses") {
    const fs::path out = scratch("loop_single.yaml");
    const Result r = run({"perturb", kData + "/toy_loop2.yaml", "--eps", "0.5", "--mode", "single", "--out", out.string()});
    REQUIRE(r.code == cli::kExitOk);
    const ModelDocument doc = load_model(out);
    const Mdp& m = doc.model;
    REQUIRE(m.num_states() == 3);
    CHECK(m.states()[2] == "null");
    CHECK(m.row(0, 0) == TransitionRow{{1, 0.5}, {2, 0.5}});
    CHECK(doc.metadata.at("mode") == "single");
    CHECK(std::stod(doc.metadata.at("epsilon")) == 0.5);
}

TEST_CASE("perturb with the AEL rule records epsilon") {
    const fs::path ring = scratch("sweep20.yaml");
    REQUIRE(run({"sweep", "--n", "20", "--out", ring.string()}).code == cli::kExitOk);
    const fs::path out = scratch("sweep20_recursive.yaml");
    REQUIRE(run({"perturb", ring.string(), "--eps-rule", "ael", "--mode", "recursive", "--out", out.string()}).code ==
            cli::kExitOk);
    CHECK(std::stod(load_model(out).metadata.at("epsilon")) == doctest::Approx(0.95).epsilon(1e-12));
}

TEST_CASE("perturb rejects epsilon outside (0, 1)") {
    CHECK(run({"perturb", kData + "/toy_loop2.yaml", "--eps", "1.0"}).code == cli::kExitSolver);
    CHECK(run({"perturb", kData + "/toy_loop2.yaml", "--eps", "0"}).code == cli::kExitSolver);
    CHECK(run({"perturb", kData + "/toy_loop2.yaml"}).code == cli::kExitUsage);
}

TEST_CASE("converge on the sweeping ring") {
    const fs::path ring = scratch("sweep20_converge.yaml");
    REQUIRE(run({"sweep", "--n", "20", "--out", ring.string()}).code == cli::kExitOk);

    const fs::path csv = scratch("sweep20_profile.csv");
    const Result raw = run({"converge", ring.string(), "--horizon", "50", "--csv", csv.string()});
    REQUIRE(raw.code == cli::kExitOk);
    CHECK(raw.kv.at("first_passage") == "none");
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,t_in_ael,tv");
    int rows = 0;
    while (std::getline(in, line)) {
        CHECK(std::stod(line.substr(line.rfind(',') + 1)) == doctest::Approx(0.95).epsilon(1e-12));
        ++rows;
    }
    CHECK(rows == 51);

    const Result mixed = run({"converge", ring.string(), "--three-ael", "--tol", "0.05"});
    REQUIRE(mixed.code == cli::kExitOk);
    CHECK(mixed.kv.at("three_ael_pass") == "true");
    CHECK(num(mixed, "three_ael_tv") <= 0.05);
}

TEST_CASE("converge on the perturbed loop reaches the tolerance") {
    const fs::path out = scratch("loop_converge.yaml");
    REQUIRE(run({"perturb", kData + "/toy_loop2.yaml", "--eps", "0.5", "--out", out.string()}).code == cli::kExitOk);
    const Result r = run({"converge", out.string(), "--horizon", "200", "--tol", "1e-6"});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(r.kv.at("first_passage") != "none");
}

TEST_CASE("gradcheck on the branch") {
    const Result r = run({"gradcheck", kData + "/toy_branch.yaml"});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(num(r, "cosine_sspg_fd") == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.kv.at("sspg_exact").find("d/a1:0.25,d/a2:-0.25") != std::string::npos);
    CHECK(num(r, "sspg_exact_projected_change") == doctest::Approx(0.125 * 0.01));

    const Result disc = run({"gradcheck", kData + "/toy_branch.yaml", "--gamma", "0.9"});
    REQUIRE(disc.code == cli::kExitOk);
    CHECK(disc.kv.at("classic").find("d/a1:0.225,d/a2:-0.225") != std::string::npos);
    CHECK(disc.kv.at("classic_vs_episodic") == "mismatch");
    CHECK(num(disc, "max_rel_error_classic_fd_discounted") < 1e-6);

    CHECK(run({"gradcheck", kData + "/toy_branch.yaml", "--gamma", "abc"}).code == cli::kExitUsage);
}

TEST_CASE("gradcheck Monte-Carlo estimate and CSV") {
    const fs::path csv = scratch("branch_gradients.csv");
    const Result r = run({"gradcheck", kData + "/toy_branch.yaml", "--mc", "100000", "--seed", "7", "--threads", "2",
                          "--csv", csv.string()});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(r.kv.at("mc_within_3se") == "true");
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "method,state,action,value,standard_error");

    // Thread count does not change the result.
    const Result single = run({"gradcheck", kData + "/toy_branch.yaml", "--mc", "100000", "--seed", "7", "--threads", "1"});
    CHECK(single.kv.at("sspg_mc") == r.kv.at("sspg_mc"));
}

TEST_CASE("gradcheck reads a theta file") {
    const fs::path theta = scratch("branch_theta.yaml");
    std::ofstream(theta) << "d: {a1: 1.0}\n";
    const Result r = run({"gradcheck", kData + "/toy_branch.yaml", "--theta", theta.string()});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(num(r, "max_rel_error_sspg_fd") < 1e-6);
}

TEST_CASE("sweep writes to stdout by default") {
    const Result r = run({"sweep", "--n", "3"});
    REQUIRE(r.code == cli::kExitOk);
    const Mdp m = parse_model(r.out).model;
    CHECK(m.num_states() == 3);
}
