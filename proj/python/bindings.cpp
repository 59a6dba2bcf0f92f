#include "episteady/chain.hpp"
#include "episteady/error.hpp"
#include "episteady/fixtures.hpp"
#include "episteady/model_io.hpp"
#include "episteady/perturbation.hpp"
#include "episteady/policy_gradient.hpp"
#include "episteady/rollout.hpp"
#include "episteady/values.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace episteady;

namespace {

// Policies cross the boundary as (states x actions) arrays.
TabularPolicy as_policy(const Mdp& m, const std::optional<Eigen::MatrixXd>& probs) {
    if (!probs) return TabularPolicy::uniform(m.num_states(), m.num_actions());
    if (probs->rows() != static_cast<Eigen::Index>(m.num_states()) ||
        probs->cols() != static_cast<Eigen::Index>(m.num_actions()))
        throw Error(ErrorCode::DimensionMismatch, "policy must have shape (num_states, num_actions)");
    return {*probs};
}

SoftmaxPolicy as_theta(const Mdp& m, const std::optional<Eigen::MatrixXd>& theta) {
    if (!theta) return SoftmaxPolicy::zeros(m.num_states(), m.num_actions());
    return {*theta};
}

PerturbationMode as_mode(const std::string& mode) {
    if (mode == "single") return PerturbationMode::Single;
    if (mode == "recursive") return PerturbationMode::Recursive;
    throw py::value_error("mode must be 'single' or 'recursive'");
}

} // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "Exact steady-state analysis of episodic decision processes";

    py::register_exception<Error>(mod, "AnalysisError", PyExc_RuntimeError);
    py::register_exception<ParseError>(mod, "ParseError", PyExc_ValueError);

    py::class_<Mdp>(mod, "Mdp")
        .def_property_readonly("states", &Mdp::states)
        .def_property_readonly("actions", &Mdp::actions)
        .def_property_readonly("num_states", &Mdp::num_states)
        .def_property_readonly("num_actions", &Mdp::num_actions)
        .def_property_readonly("reward", &Mdp::reward)
        .def_property_readonly("initial", &Mdp::initial)
        .def("transition_matrix",
             [](const Mdp& m, std::size_t a) {
                 Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.num_states()),
                                                           static_cast<Eigen::Index>(m.num_states()));
                 for (StateIndex s = 0; s < m.num_states(); ++s)
                     for (const auto& tr : m.row(s, a))
                         t(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(tr.target)) = tr.probability;
                 return t;
             },
             py::arg("action"))
        .def("__eq__", [](const Mdp& a, const Mdp& b) { return a == b; })
        .def("__repr__", [](const Mdp& m) {
            return "<Mdp states=" + std::to_string(m.num_states()) + " actions=" + std::to_string(m.num_actions()) +
                   ">";
        });

    mod.def("parse_model", [](const std::string& text) { return parse_model(text).model; }, py::arg("text"));
    mod.def("load_model", [](const std::string& path) { return load_model(path).model; }, py::arg("path"));
    mod.def("write_model", [](const Mdp& m) { return write_model(m); }, py::arg("model"));

    mod.def("toy_loop2", &fixtures::toy_loop2);
    mod.def("toy_branch", &fixtures::toy_branch);
    mod.def("state_sweeping_env", &state_sweeping_env, py::arg("n"));

    mod.def("terminal_set", [](const Mdp& m) { return terminal_closure(m).terminal_set; }, py::arg("model"));
    mod.def("is_episodic", [](const Mdp& m) { return episodic_report(m).episodic(); }, py::arg("model"));

    mod.def("stationary_distribution",
            [](const Mdp& m, const std::optional<Eigen::MatrixXd>& pi) {
                const StationaryReport r = stationary_distribution(induce_chain(m, as_policy(m, pi)));
                return py::dict(py::arg("rho") = r.rho, py::arg("period") = r.period,
                                py::arg("aperiodic") = r.aperiodic, py::arg("residual") = r.residual);
            },
            py::arg("model"), py::arg("policy") = py::none());

    mod.def("performance",
            [](const Mdp& m, const std::optional<Eigen::MatrixXd>& pi) {
                const PerformancePair p = performance_pair(m, as_policy(m, pi));
                return py::dict(py::arg("j_epi") = p.j_epi, py::arg("j_avg") = p.j_avg,
                                py::arg("expected_length") = p.expected_length, py::arg("residual") = p.residual());
            },
            py::arg("model"), py::arg("policy") = py::none());

    mod.def("q_values",
            [](const Mdp& m, const std::optional<Eigen::MatrixXd>& pi) {
                return solve_q(m, as_policy(m, pi), m.discount()).q;
            },
            py::arg("model"), py::arg("policy") = py::none());

    mod.def("perturb",
            [](const Mdp& m, double eps, const std::string& mode) { return perturb(m, eps, as_mode(mode)).model; },
            py::arg("model"), py::arg("epsilon"), py::arg("mode") = "single");

    mod.def("three_ael_experiment",
            [](const Mdp& m, double tol, const std::optional<Eigen::MatrixXd>& pi) {
                const ThreeAelReport r =
                    three_ael_experiment(m, tol, pi ? std::optional(as_policy(m, pi)) : std::nullopt);
                return py::dict(py::arg("expected_length") = r.expected_length, py::arg("epsilon") = r.epsilon,
                                py::arg("n") = r.n, py::arg("t_star") = r.t_star, py::arg("tv") = r.tv,
                                py::arg("passed") = r.pass);
            },
            py::arg("model"), py::arg("tol"), py::arg("policy") = py::none());

    mod.def("softmax", [](const Eigen::MatrixXd& theta) { return SoftmaxPolicy{theta}.probs().probs; },
            py::arg("theta"));

    mod.def("sspg_exact",
            [](const Mdp& m, const std::optional<Eigen::MatrixXd>& theta) {
                return sspg_exact(m, as_theta(m, theta)).gradient;
            },
            py::arg("model"), py::arg("theta") = py::none());

    mod.def("classic_pg_exact",
            [](const Mdp& m, double gamma_c, const std::optional<Eigen::MatrixXd>& theta) {
                return classic_pg_exact(m, as_theta(m, theta), gamma_c).gradient;
            },
            py::arg("model"), py::arg("gamma_c"), py::arg("theta") = py::none());

    mod.def("fd_gradient",
            [](const Mdp& m, const std::optional<Eigen::MatrixXd>& theta, std::optional<double> gamma_c, double h) {
                const GradientObjective obj =
                    gamma_c ? GradientObjective{DiscountedObjective{*gamma_c}} : GradientObjective{EpisodicObjective{}};
                return fd_gradient(m, as_theta(m, theta), obj, h).gradient;
            },
            py::arg("model"), py::arg("theta") = py::none(), py::arg("gamma_c") = py::none(), py::arg("h") = 1e-5);

    mod.def("sspg_mc_estimate",
            [](const Mdp& m, const std::optional<Eigen::MatrixXd>& theta, std::size_t rollouts, std::uint64_t seed,
               std::size_t threads) {
                MonteCarloOptions opts;
                opts.rollouts = rollouts;
                opts.seed = seed;
                opts.threads = threads;
                GradientReport r;
                {
                    py::gil_scoped_release release;
                    r = sspg_mc_estimate(m, as_theta(m, theta), opts);
                }
                return py::dict(py::arg("gradient") = r.gradient, py::arg("standard_error") = r.standard_error,
                                py::arg("estimated_length") = r.estimated_length, py::arg("samples") = r.samples,
                                py::arg("t_star") = r.t_star);
            },
            py::arg("model"), py::arg("theta") = py::none(), py::arg("rollouts") = 10000, py::arg("seed") = 0,
            py::arg("threads") = 0);

}
