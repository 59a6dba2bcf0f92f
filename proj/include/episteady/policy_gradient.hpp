#pragma once

#include "episteady/mdp.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace episteady {

/// pi(s,a) = exp(theta(s,a)) / sum_b exp(theta(s,b)).
struct SoftmaxPolicy {
    Eigen::MatrixXd theta; // num_states x num_actions

    static SoftmaxPolicy zeros(std::size_t num_states, std::size_t num_actions);
    TabularPolicy probs() const;
};

enum class GradientMethod { SspgExact, ClassicDiscounted, FiniteDifference, SspgMonteCarlo };

std::string_view to_string(GradientMethod method);

struct GradientReport {
    Eigen::MatrixXd gradient; // indexed like theta
    GradientMethod method = GradientMethod::SspgExact;
    std::optional<double> gamma_c;      // classic gradient and discounted FD objective
    double h = 0.0;                     // finite-difference step
    double expected_length = 0.0;       // exact E[T] used (0 when not needed)

    // Monte-Carlo fields.
    Eigen::MatrixXd standard_error;
    Eigen::MatrixXd without_ael_factor;          // mean of Q * grad log pi
    Eigen::MatrixXd without_ael_standard_error;
    double estimated_length = 0.0;               // pooled AEL estimate
    double epsilon = 0.0;
    std::size_t rollouts = 0;
    std::size_t samples = 0;                     // kept after discarding terminal/null draws
    std::size_t t_star = 0;
    std::uint64_t seed = 0;
};

/// (E[T]-1) * E[Q grad log pi | s non-terminal] under the stationary distribution.
GradientReport sspg_exact(const Mdp& m, const SoftmaxPolicy& theta);

/// Gradient of E_{s0~rho0}[V(s0)] with discount gamma_c off the terminal set and 0 on it.
GradientReport classic_pg_exact(const Mdp& m, const SoftmaxPolicy& theta, double gamma_c);

struct EpisodicObjective {};
struct DiscountedObjective {
    double gamma_c;
};
using GradientObjective = std::variant<EpisodicObjective, DiscountedObjective>;

/// Episode-wise performance, or the discounted objective that classic_pg_exact differentiates.
double objective_value(const Mdp& m, const TabularPolicy& pi, const GradientObjective& objective);

/// Central differences with exact solvers.
GradientReport fd_gradient(const Mdp& m, const SoftmaxPolicy& theta, const GradientObjective& objective,
                           double h = 1e-5);

struct MonteCarloOptions {
    std::size_t rollouts = 10000;
    std::uint64_t seed = 0;
    std::optional<double> epsilon;       // default 1 - 1/E[T]
    std::optional<std::size_t> t_star;   // default ceil(3 E[T])
    std::size_t ael_episodes = 10;       // complete episodes per rollout feeding the AEL estimate
    bool include_ael_factor = true;
    std::size_t threads = 0;
};

/// Samples (s,a) at t* on the recursively perturbed model, drops terminal and null draws,
/// scores Q by the return up to and including the closing terminal, and scales by the
/// pooled AEL estimate minus one. Rollout k uses stream (seed, k).
/// Throws Error(NoValidSamples) when every draw was dropped.
GradientReport sspg_mc_estimate(const Mdp& m, const SoftmaxPolicy& theta, const MonteCarloOptions& options);

/// d Q(s,a) / d theta(p) for every parameter p, by central differences. Entry
/// [p](s,a) with p = s_p * num_actions + a_p.
std::vector<Eigen::MatrixXd> q_parameter_gradient(const Mdp& m, const SoftmaxPolicy& theta, const DiscountSpec& d,
                                                  double h = 1e-5);

struct GradientBalance {
    Eigen::MatrixXd lhs;
    Eigen::MatrixXd rhs;
    double residual() const { return (lhs - rhs).cwiseAbs().maxCoeff(); }
};

/// E_rho[(1 - gamma(s)) sum_a pi dQ] against E_rho[gamma(s) sum_a Q d pi], with rho the
/// stationary distribution of the policy chain held fixed.
GradientBalance discounted_gradient_balance(const Mdp& m, const SoftmaxPolicy& theta, const DiscountSpec& d,
                                            double h = 1e-5);

/// E_rho[Q grad log pi] against ((1-gamma_c)/gamma_c) E_rho[grad Q] under constant discount.
GradientBalance mixed_identity(const Mdp& m, const SoftmaxPolicy& theta, double gamma_c, double h = 1e-5);

double mixed_identity_check(const Mdp& m, const SoftmaxPolicy& theta, double gamma_c);

double cosine_similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

} // namespace episteady
