#include "cli.hpp"

#include "episteady/chain.hpp"
#include "episteady/error.hpp"
#include "episteady/model_io.hpp"
#include "episteady/perturbation.hpp"
#include "episteady/policy_gradient.hpp"
#include "episteady/rollout.hpp"
#include "episteady/text.hpp"
#include "episteady/values.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

namespace episteady::cli {
namespace {

struct Io {
    std::ostream& out;
    std::ostream& err;
};

std::string join_states(const std::vector<StateIndex>& set, const std::vector<std::string>& names) {
    std::string s;
    for (std::size_t i = 0; i < set.size(); ++i) s += (i ? "," : "") + names[set[i]];
    return s;
}

std::string labelled(const Eigen::VectorXd& v, const std::vector<std::string>& names) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + names[static_cast<std::size_t>(i)] + ":" + format_double(v[i]);
    return s;
}

std::string matrix_text(const Eigen::MatrixXd& g, const Mdp& m) {
    std::string s;
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j)
            s += (s.empty() ? "" : ",") + m.states()[static_cast<std::size_t>(i)] + "/" +
                 m.actions()[static_cast<std::size_t>(j)] + ":" + format_double(g(i, j));
    return s;
}

double max_relative_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& reference) {
    const double scale = reference.cwiseAbs().maxCoeff();
    const double diff = (estimate - reference).cwiseAbs().maxCoeff();
    return scale > 0.0 ? diff / scale : diff;
}

ModelDocument load(const std::string& path, Io io) {
    ModelDocument doc = load_model(path);
    for (const auto& w : doc.warnings) io.err << "warning: " << w << "\n";
    return doc;
}

TabularPolicy policy_from(const std::string& spec, const Mdp& m) {
    if (spec == "uniform") return TabularPolicy::uniform(m.num_states(), m.num_actions());
    return load_policy(spec, m);
}

void require_valid(const Mdp& m) {
    const auto problems = validate_mdp(m);
    if (!problems.empty()) throw Error(ErrorCode::InvalidModel, problems.front());
}

// Writes to `path`, or to `fallback` when path is "-" or empty.
template <class Writer>
void emit(const std::string& path, std::ostream& fallback, Writer&& write) {
    if (path.empty() || path == "-") {
        write(fallback);
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write '" + path + "'");
    write(file);
}

struct AnalyzeArgs {
    std::string model;
    std::string policy = "uniform";
};

int analyze(const AnalyzeArgs& a, Io io) {
    const Mdp m = load(a.model, io).model;
    require_valid(m);
    const TabularPolicy pi = policy_from(a.policy, m);
    const EpisodicReport ep = episodic_report(m);
    io.out << "terminal_set=" << join_states(ep.terminal_set, m.states()) << "\n";
    io.out << "homogeneity=" << (ep.homogeneity_ok ? "ok" : "fail") << "\n";
    io.out << "finiteness=" << (ep.finiteness_ok ? "ok" : "fail") << "\n";
    if (!ep.finiteness_ok && !ep.finiteness_witness.empty())
        io.out << "finiteness_witness=" << join_states(ep.finiteness_witness, m.states()) << "\n";
    require_episodic(m);

    const MarkovChain c = induce_chain(m, pi);
    const StationaryReport st = stationary_distribution(c);
    const PerformancePair perf = performance_pair(m, pi);
    io.out << "rho=" << labelled(st.rho, m.states()) << "\n";
    io.out << "period=" << st.period << "\n";
    io.out << "aperiodic=" << (st.aperiodic ? "true" : "false") << "\n";
    io.out << "stationary_residual=" << format_double(st.residual) << "\n";
    io.out << "expected_length=" << format_double(perf.expected_length) << "\n";
    io.out << "j_epi=" << format_double(perf.j_epi) << "\n";
    io.out << "j_avg=" << format_double(perf.j_avg) << "\n";
    io.out << "identity_residual=" << format_double(perf.residual()) << "\n";
    return kExitOk;
}

struct PerturbArgs {
    std::string model;
    std::optional<double> eps;
    std::string eps_rule;
    std::string mode = "single";
    std::string policy = "uniform";
    std::string out;
};

int perturb_cmd(const PerturbArgs& a, Io io) {
    const Mdp m = load(a.model, io).model;
    require_valid(m);
    require_episodic(m);
    double eps = 0.0;
    if (a.eps) {
        eps = *a.eps;
    } else {
        const double length = expected_episode_length(induce_chain(m, policy_from(a.policy, m)),
                                                      terminal_closure(m).terminal_set);
        eps = 1.0 - 1.0 / length;
    }
    const PerturbationMode mode = a.mode == "recursive" ? PerturbationMode::Recursive : PerturbationMode::Single;
    const PerturbedMdp p = perturb(m, eps, mode);

    const std::map<std::string, std::string> metadata{
        {"epsilon", format_double17(eps)},
        {"mode", std::string(to_string(mode))},
        {"null_state", p.model.states()[p.null_state]},
    };
    const std::string text = write_model(p.model, metadata);
    if (!(parse_model(text).model == p.model))
        throw Error(ErrorCode::InternalInconsistency, "perturbed model does not re-parse to itself");
    emit(a.out, io.out, [&](std::ostream& o) { o << text; });
    if (!a.out.empty() && a.out != "-") {
        io.out << "epsilon=" << format_double17(eps) << "\n";
        io.out << "mode=" << to_string(mode) << "\n";
        io.out << "null_state=" << p.model.states()[p.null_state] << "\n";
        io.out << "written=" << a.out << "\n";
    }
    return kExitOk;
}

struct ConvergeArgs {
    std::string model;
    std::string policy = "uniform";
    std::size_t horizon = 100;
    double tol = 0.05;
    std::string csv;
    bool three_ael = false;
};

int converge(const ConvergeArgs& a, Io io) {
    const Mdp m = load(a.model, io).model;
    require_valid(m);
    require_episodic(m);
    const TabularPolicy pi = policy_from(a.policy, m);
    const ConvergenceProfile profile = convergence_profile(m, pi, a.horizon, a.tol);
    if (!a.csv.empty()) emit(a.csv, io.out, [&](std::ostream& o) { write_profile_csv(o, profile); });
    io.out << "ael=" << format_double(profile.ael) << "\n";
    io.out << "first_passage=" << (profile.first_passage ? std::to_string(*profile.first_passage) : "none") << "\n";
    io.out << "final_tv=" << format_double(profile.tv.back()) << "\n";
    if (a.three_ael) {
        const ThreeAelReport r = three_ael_experiment(m, a.tol, pi);
        io.out << "three_ael_epsilon=" << format_double(r.epsilon) << "\n";
        io.out << "three_ael_n=" << r.n << "\n";
        io.out << "three_ael_t_star=" << r.t_star << "\n";
        io.out << "three_ael_tv=" << format_double(r.tv) << "\n";
        io.out << "three_ael_pass=" << (r.pass ? "true" : "false") << "\n";
    }
    return kExitOk;
}

struct GradcheckArgs {
    std::string model;
    std::string theta = "zeros";
    std::string gamma = "episodic";
    std::size_t mc = 0;
    std::uint64_t seed = 0;
    double alpha = 0.01;
    double h = 1e-5;
    std::string csv;
};

void gradient_lines(std::ostream& out, const std::string& name, const GradientReport& g, const Mdp& m,
                    double alpha) {
    out << name << "=" << matrix_text(g.gradient, m) << "\n";
    out << name << "_projected_change=" << format_double(g.gradient.squaredNorm() * alpha) << "\n";
}

void write_gradient_csv(std::ostream& o, const Mdp& m, const std::vector<std::pair<std::string, GradientReport>>& rows) {
    o << "method,state,action,value,standard_error\n";
    for (const auto& [name, g] : rows)
        for (Eigen::Index i = 0; i < g.gradient.rows(); ++i)
            for (Eigen::Index j = 0; j < g.gradient.cols(); ++j) {
                const double se = g.standard_error.size() ? g.standard_error(i, j) : 0.0;
                o << name << "," << m.states()[static_cast<std::size_t>(i)] << ","
                  << m.actions()[static_cast<std::size_t>(j)] << "," << format_double17(g.gradient(i, j)) << ","
                  << format_double17(se) << "\n";
            }
}

int gradcheck(const GradcheckArgs& a, std::size_t threads, Io io) {
    const Mdp m = load(a.model, io).model;
    require_valid(m);
    require_episodic(m);
    const SoftmaxPolicy theta =
        a.theta == "zeros" ? SoftmaxPolicy::zeros(m.num_states(), m.num_actions()) : load_theta(a.theta, m);

    std::optional<double> gamma_c;
    if (a.gamma != "episodic") {
        std::istringstream in(a.gamma);
        in.imbue(std::locale::classic());
        double g = 0.0;
        if (!(in >> g) || !in.eof() || g < 0.0 || g > 1.0)
            throw CLI::ValidationError("--gamma", "expected 'episodic' or a number in [0, 1]");
        gamma_c = g;
    }

    const GradientReport exact = sspg_exact(m, theta);
    const GradientReport fd = fd_gradient(m, theta, EpisodicObjective{}, a.h);
    std::vector<std::pair<std::string, GradientReport>> rows{{"sspg_exact", exact}, {"fd_episodic", fd}};

    io.out << "expected_length=" << format_double(exact.expected_length) << "\n";
    io.out << "alpha=" << format_double(a.alpha) << "\n";
    gradient_lines(io.out, "sspg_exact", exact, m, a.alpha);
    gradient_lines(io.out, "fd_episodic", fd, m, a.alpha);
    io.out << "cosine_sspg_fd=" << format_double(cosine_similarity(exact.gradient, fd.gradient)) << "\n";
    io.out << "max_rel_error_sspg_fd=" << format_double(max_relative_error(exact.gradient, fd.gradient)) << "\n";

    if (gamma_c) {
        const GradientReport classic = classic_pg_exact(m, theta, *gamma_c);
        const GradientReport fd_disc = fd_gradient(m, theta, DiscountedObjective{*gamma_c}, a.h);
        rows.emplace_back("classic", classic);
        rows.emplace_back("fd_discounted", fd_disc);
        gradient_lines(io.out, "classic", classic, m, a.alpha);
        const double vs_episodic = max_relative_error(classic.gradient, fd.gradient);
        io.out << "cosine_classic_fd_episodic=" << format_double(cosine_similarity(classic.gradient, fd.gradient))
               << "\n";
        io.out << "max_rel_error_classic_fd_episodic=" << format_double(vs_episodic) << "\n";
        io.out << "max_rel_error_classic_fd_discounted="
               << format_double(max_relative_error(classic.gradient, fd_disc.gradient)) << "\n";
        io.out << "classic_vs_episodic=" << (vs_episodic > 1e-6 ? "mismatch" : "match") << "\n";
    }

    if (a.mc > 0) {
        MonteCarloOptions opts;
        opts.rollouts = a.mc;
        opts.seed = a.seed;
        opts.threads = threads;
        const GradientReport mc = sspg_mc_estimate(m, theta, opts);
        rows.emplace_back("sspg_mc", mc);
        gradient_lines(io.out, "sspg_mc", mc, m, a.alpha);
        double max_z = 0.0;
        for (Eigen::Index i = 0; i < mc.gradient.rows(); ++i)
            for (Eigen::Index j = 0; j < mc.gradient.cols(); ++j) {
                const double diff = std::abs(mc.gradient(i, j) - exact.gradient(i, j));
                const double se = mc.standard_error(i, j);
                max_z = std::max(max_z, se > 0.0 ? diff / se : (diff > 1e-12 ? INFINITY : 0.0));
            }
        io.out << "mc_samples=" << mc.samples << "\n";
        io.out << "mc_estimated_length=" << format_double(mc.estimated_length) << "\n";
        io.out << "mc_standard_error=" << matrix_text(mc.standard_error, m) << "\n";
        io.out << "cosine_mc_exact=" << format_double(cosine_similarity(mc.gradient, exact.gradient)) << "\n";
        io.out << "mc_max_z=" << format_double(max_z) << "\n";
        io.out << "mc_within_3se=" << (max_z <= 3.0 ? "true" : "false") << "\n";
    }
    if (!a.csv.empty()) emit(a.csv, io.out, [&](std::ostream& o) { write_gradient_csv(o, m, rows); });
    return kExitOk;
}

struct SweepArgs {
    std::size_t n = 20;
    std::string out;
};

int sweep(const SweepArgs& a, Io io) {
    const Mdp m = state_sweeping_env(a.n);
    emit(a.out, io.out, [&](std::ostream& o) { o << write_model(m, {{"generator", "state-sweeping"}, {"n", std::to_string(a.n)}}); });
    return kExitOk;
}

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotEpisodic: return kExitNotEpisodic;
    case ErrorCode::InvalidModel:
    case ErrorCode::DimensionMismatch: return kExitParse;
    default: return kExitSolver;
    }
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Steady-state analysis of episodic decision processes", "episteady"};
    app.require_subcommand(1);
    app.fallthrough(); // --threads may follow the subcommand
    std::size_t threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: EPISTEADY_THREADS or all cores)");

    AnalyzeArgs an;
    auto* analyze_cmd = app.add_subcommand("analyze", "Terminal set, stationary distribution and performance identity");
    analyze_cmd->add_option("model", an.model, "Model file")->required();
    analyze_cmd->add_option("--policy", an.policy, "Policy file or 'uniform'");

    PerturbArgs pa;
    auto* perturb_sub = app.add_subcommand("perturb", "Write the perturbed model with a null state appended");
    perturb_sub->add_option("model", pa.model, "Model file")->required();
    auto* eps_opt = perturb_sub->add_option("--eps", pa.eps, "Perturbation probability in (0, 1)");
    auto* rule_opt = perturb_sub->add_option("--eps-rule", pa.eps_rule, "Rule for epsilon")->check(CLI::IsMember({"ael"}));
    eps_opt->excludes(rule_opt);
    perturb_sub->add_option("--mode", pa.mode, "single or recursive")->check(CLI::IsMember({"single", "recursive"}));
    perturb_sub->add_option("--policy", pa.policy, "Policy for --eps-rule ael");
    perturb_sub->add_option("--out", pa.out, "Output path (default stdout)");

    ConvergeArgs ca;
    auto* converge_cmd = app.add_subcommand("converge", "TV distance of the marginals to the stationary distribution");
    converge_cmd->add_option("model", ca.model, "Model file")->required();
    converge_cmd->add_option("--policy", ca.policy, "Policy file or 'uniform'");
    converge_cmd->add_option("--horizon", ca.horizon, "Last time step")->check(CLI::PositiveNumber);
    converge_cmd->add_option("--tol", ca.tol, "TV tolerance")->check(CLI::PositiveNumber);
    converge_cmd->add_option("--csv", ca.csv, "Profile CSV path ('-' for stdout)");
    converge_cmd->add_flag("--three-ael", ca.three_ael, "Also run the 3-AEL sampling experiment");

    GradcheckArgs ga;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Compare exact, finite-difference and sampled gradients");
    grad_cmd->add_option("model", ga.model, "Model file")->required();
    grad_cmd->add_option("--theta", ga.theta, "Logit file or 'zeros'");
    grad_cmd->add_option("--gamma", ga.gamma, "'episodic' or a discount for the classic gradient");
    grad_cmd->add_option("--mc", ga.mc, "Monte-Carlo rollouts (0 disables)");
    grad_cmd->add_option("--seed", ga.seed, "Monte-Carlo seed");
    grad_cmd->add_option("--alpha", ga.alpha, "Step size for the projected performance change");
    grad_cmd->add_option("--fd-step", ga.h, "Finite-difference step")->check(CLI::PositiveNumber);
    grad_cmd->add_option("--csv", ga.csv, "Gradient CSV path ('-' for stdout)");

    SweepArgs sa;
    auto* sweep_cmd = app.add_subcommand("sweep", "Write the state-sweeping ring model");
    sweep_cmd->add_option("--n", sa.n, "Number of states")->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
    sweep_cmd->add_option("--out", sa.out, "Output path (default stdout)");

    const Io io{out, err};
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        if (analyze_cmd->parsed()) return analyze(an, io);
        if (perturb_sub->parsed()) {
            if (!pa.eps && pa.eps_rule.empty()) throw CLI::RequiredError("--eps or --eps-rule");
            return perturb_cmd(pa, io);
        }
        if (converge_cmd->parsed()) return converge(ca, io);
        if (grad_cmd->parsed()) return gradcheck(ga, threads, io);
        if (sweep_cmd->parsed()) return sweep(sa, io);
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitSolver;
    }
}

} // namespace episteady::cli
