#include "episteady/policy_gradient.hpp"

#include "episteady/chain.hpp"
#include "episteady/error.hpp"
#include "episteady/parallel.hpp"
#include "episteady/perturbation.hpp"
#include "episteady/rollout.hpp"
#include "episteady/text.hpp"
#include "episteady/values.hpp"

#include <cmath>
#include <stdexcept>

namespace episteady {

namespace {

Eigen::VectorXd truncated_discount(const Mdp& m, double gamma_c) {
    const auto closure = terminal_closure(m);
    if (!closure.homogeneity_ok) throw Error(ErrorCode::NotEpisodic, "model has no homogeneous terminal set");
    Eigen::VectorXd gamma = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m.num_states()), gamma_c);
    for (auto s : closure.terminal_set) gamma[static_cast<Eigen::Index>(s)] = 0.0;
    return gamma;
}

PerStateDiscount as_table(const Eigen::VectorXd& gamma) {
    return PerStateDiscount{std::vector<double>(gamma.data(), gamma.data() + gamma.size())};
}

// (s,b) -> pi(s,b) (Q(s,b) - V(s)), i.e. sum_a pi Q d log pi / d theta(s,b).
Eigen::MatrixXd policy_score(const TabularPolicy& pi, const ValueTable& values) {
    return pi.probs.cwiseProduct(values.q.colwise() - values.v);
}

struct McDraw {
    bool valid = false;
    StateIndex state = 0;
    ActionIndex action = 0;
    double q = 0.0;
    double episode_steps = 0.0;
    std::size_t episodes = 0;
};

} // namespace

SoftmaxPolicy SoftmaxPolicy::zeros(std::size_t num_states, std::size_t num_actions) {
    return {Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_states), static_cast<Eigen::Index>(num_actions))};
}

TabularPolicy SoftmaxPolicy::probs() const {
    TabularPolicy pi{Eigen::MatrixXd(theta.rows(), theta.cols())};
    for (Eigen::Index s = 0; s < theta.rows(); ++s) {
        const Eigen::RowVectorXd e = (theta.row(s).array() - theta.row(s).maxCoeff()).exp();
        pi.probs.row(s) = e / e.sum();
    }
    return pi;
}

std::string_view to_string(GradientMethod method) {
    switch (method) {
    case GradientMethod::SspgExact: return "sspg_exact";
    case GradientMethod::ClassicDiscounted: return "classic_discounted";
    case GradientMethod::FiniteDifference: return "finite_difference";
    case GradientMethod::SspgMonteCarlo: return "sspg_monte_carlo";
    }
    return "unknown";
}

GradientReport sspg_exact(const Mdp& m, const SoftmaxPolicy& theta) {
    const auto episodic = require_episodic(m);
    const auto pi = theta.probs();
    const auto chain = induce_chain(m, pi);
    const auto stationary = stationary_distribution(chain);
    const double length = expected_episode_length(chain, stationary, episodic.terminal_set);
    const auto values = solve_q(m, pi, EpisodicDiscount{});

    Eigen::VectorXd weight = stationary.rho;
    for (auto s : episodic.terminal_set) weight[static_cast<Eigen::Index>(s)] = 0.0;
    const double open_mass = weight.sum();

    GradientReport report;
    report.method = GradientMethod::SspgExact;
    report.expected_length = length;
    report.gradient = Eigen::MatrixXd::Zero(theta.theta.rows(), theta.theta.cols());
    if (open_mass > 0.0)
        report.gradient = ((length - 1.0) / open_mass) * (weight.asDiagonal() * policy_score(pi, values));
    return report;
}

GradientReport classic_pg_exact(const Mdp& m, const SoftmaxPolicy& theta, double gamma_c) {
    if (!(gamma_c >= 0.0 && gamma_c < 1.0)) throw std::invalid_argument("gamma_c must lie in [0,1)");
    const auto closure = terminal_closure(m);
    const Eigen::VectorXd gamma = truncated_discount(m, gamma_c);
    const auto pi = theta.probs();
    const auto values = solve_q(m, pi, as_table(gamma));
    const auto chain = induce_chain(m, pi);

    // Visits after leaving the start state carry one factor gamma_c each.
    Eigen::VectorXd visits = gamma_c * expected_episode_visits(chain, closure.terminal_set, gamma_c);
    for (auto s : closure.terminal_set) visits[static_cast<Eigen::Index>(s)] = 0.0;

    GradientReport report;
    report.method = GradientMethod::ClassicDiscounted;
    report.gamma_c = gamma_c;
    report.gradient = visits.asDiagonal() * policy_score(pi, values);
    return report;
}

double objective_value(const Mdp& m, const TabularPolicy& pi, const GradientObjective& objective) {
    if (std::holds_alternative<EpisodicObjective>(objective)) return episodic_performance(m, pi);
    const double gamma_c = std::get<DiscountedObjective>(objective).gamma_c;
    const auto values = solve_q(m, pi, as_table(truncated_discount(m, gamma_c)));
    return m.initial().dot(values.v);
}

GradientReport fd_gradient(const Mdp& m, const SoftmaxPolicy& theta, const GradientObjective& objective, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
    GradientReport report;
    report.method = GradientMethod::FiniteDifference;
    report.h = h;
    if (auto* d = std::get_if<DiscountedObjective>(&objective)) report.gamma_c = d->gamma_c;
    report.gradient = Eigen::MatrixXd::Zero(theta.theta.rows(), theta.theta.cols());
    SoftmaxPolicy shifted = theta;
    for (Eigen::Index s = 0; s < theta.theta.rows(); ++s)
        for (Eigen::Index a = 0; a < theta.theta.cols(); ++a) {
            shifted.theta(s, a) = theta.theta(s, a) + h;
            const double up = objective_value(m, shifted.probs(), objective);
            shifted.theta(s, a) = theta.theta(s, a) - h;
            const double down = objective_value(m, shifted.probs(), objective);
            shifted.theta(s, a) = theta.theta(s, a);
            report.gradient(s, a) = (up - down) / (2.0 * h);
        }
    return report;
}

GradientReport sspg_mc_estimate(const Mdp& m, const SoftmaxPolicy& theta, const MonteCarloOptions& options) {
    if (options.rollouts == 0) throw std::invalid_argument("Monte-Carlo estimate needs at least one rollout");
    if (options.ael_episodes == 0) throw std::invalid_argument("AEL estimate needs at least one episode per rollout");
    const auto episodic = require_episodic(m);
    const auto pi = theta.probs();
    const auto chain = induce_chain(m, pi);
    const double length = expected_episode_length(chain, episodic.terminal_set);

    GradientReport report;
    report.method = GradientMethod::SspgMonteCarlo;
    report.expected_length = length;
    report.epsilon = options.epsilon ? *options.epsilon : 1.0 - 1.0 / length;
    report.t_star = options.t_star ? *options.t_star : static_cast<std::size_t>(std::ceil(3.0 * length));
    report.rollouts = options.rollouts;
    report.seed = options.seed;
    if (!(report.epsilon >= 0.0 && report.epsilon < 1.0))
        throw Error(ErrorCode::EpsOutOfRange, "epsilon " + format_double(report.epsilon) + " outside [0,1)");

    const std::size_t n = m.num_states();
    std::optional<PerturbedMdp> perturbed;
    if (report.epsilon > 0.0) perturbed = recursive_perturb(m, report.epsilon);
    const Mdp& sampled = perturbed ? perturbed->model : m;
    const TabularPolicy sampled_pi = perturbed ? extend_policy(pi) : pi;
    const Simulator sim(sampled, sampled_pi);
    const std::vector<bool> terminal = terminal_closure(m).mask(n);
    auto is_terminal = [&](StateIndex s) { return s < n && terminal[s]; };
    const Eigen::VectorXd& reward = sampled.reward();

    std::vector<McDraw> draws(options.rollouts);
    parallel_for(options.rollouts, options.threads, [&](std::size_t k) {
        Rng rng(options.seed, k);
        McDraw& draw = draws[k];
        StateIndex s = sim.initial_state(rng);
        bool collecting = false, after_terminal = is_terminal(s);
        std::size_t steps_in_episode = 0;
        for (std::size_t t = 0; t <= report.t_star || collecting || draw.episodes < options.ael_episodes; ++t) {
            const ActionIndex a = sim.action(s, rng);
            if (t == report.t_star && !is_terminal(s) && s < n) {
                draw.valid = collecting = true;
                draw.state = s;
                draw.action = a;
            }
            s = sim.next_state(s, a, rng);
            if (collecting) {
                draw.q += reward[static_cast<Eigen::Index>(s)];
                collecting = !is_terminal(s);
            }
            if (s < n) ++steps_in_episode;
            if (is_terminal(s)) {
                if (after_terminal && draw.episodes < options.ael_episodes) {
                    draw.episode_steps += static_cast<double>(steps_in_episode);
                    ++draw.episodes;
                }
                after_terminal = true;
                steps_in_episode = 0;
            }
        }
    });

    // Reduce in rollout order so the result does not depend on the thread count.
    const auto rows = static_cast<Eigen::Index>(n), cols = static_cast<Eigen::Index>(m.num_actions());
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(rows, cols), sum_sq = Eigen::MatrixXd::Zero(rows, cols);
    double episode_steps = 0.0;
    std::size_t episodes = 0;
    for (const auto& draw : draws) {
        episode_steps += draw.episode_steps;
        episodes += draw.episodes;
        if (!draw.valid) continue;
        ++report.samples;
        const auto s = static_cast<Eigen::Index>(draw.state);
        for (Eigen::Index b = 0; b < cols; ++b) {
            const double score = (static_cast<Eigen::Index>(draw.action) == b ? 1.0 : 0.0) - pi.probs(s, b);
            const double f = draw.q * score;
            sum(s, b) += f;
            sum_sq(s, b) += f * f;
        }
    }
    if (report.samples == 0)
        throw Error(ErrorCode::NoValidSamples, "all " + std::to_string(options.rollouts) +
                                                   " draws landed on terminal or null states");
    const double count = static_cast<double>(report.samples);
    const Eigen::MatrixXd mean = sum / count;
    const Eigen::MatrixXd variance =
        count > 1 ? Eigen::MatrixXd(((sum_sq / count) - mean.cwiseProduct(mean)).cwiseMax(0.0) * (count / (count - 1)))
                  : Eigen::MatrixXd::Zero(rows, cols);
    report.without_ael_factor = mean;
    report.without_ael_standard_error = (variance / count).cwiseSqrt();
    report.estimated_length = episode_steps / static_cast<double>(episodes);
    const double factor = options.include_ael_factor ? report.estimated_length - 1.0 : 1.0;
    report.gradient = factor * report.without_ael_factor;
    report.standard_error = std::abs(factor) * report.without_ael_standard_error;
    return report;
}

std::vector<Eigen::MatrixXd> q_parameter_gradient(const Mdp& m, const SoftmaxPolicy& theta, const DiscountSpec& d,
                                                  double h) {
    std::vector<Eigen::MatrixXd> out;
    SoftmaxPolicy shifted = theta;
    for (Eigen::Index s = 0; s < theta.theta.rows(); ++s)
        for (Eigen::Index a = 0; a < theta.theta.cols(); ++a) {
            shifted.theta(s, a) = theta.theta(s, a) + h;
            const Eigen::MatrixXd up = solve_q(m, shifted.probs(), d).q;
            shifted.theta(s, a) = theta.theta(s, a) - h;
            const Eigen::MatrixXd down = solve_q(m, shifted.probs(), d).q;
            shifted.theta(s, a) = theta.theta(s, a);
            out.push_back((up - down) / (2.0 * h));
        }
    return out;
}

namespace {

// E_rho[w(s) sum_a pi(s,a) dQ(s,a)/dtheta(p)] for every parameter p.
Eigen::MatrixXd expected_q_gradient(const TabularPolicy& pi, const Distribution& rho, const Eigen::VectorXd& w,
                                    const std::vector<Eigen::MatrixXd>& dq) {
    const Eigen::VectorXd weight = rho.cwiseProduct(w);
    Eigen::MatrixXd out(pi.probs.rows(), pi.probs.cols());
    for (Eigen::Index s = 0; s < out.rows(); ++s)
        for (Eigen::Index a = 0; a < out.cols(); ++a)
            out(s, a) = weight.dot(dq[static_cast<std::size_t>(s * out.cols() + a)].cwiseProduct(pi.probs).rowwise().sum());
    return out;
}

} // namespace

GradientBalance discounted_gradient_balance(const Mdp& m, const SoftmaxPolicy& theta, const DiscountSpec& d,
                                            double h) {
    const auto pi = theta.probs();
    const Eigen::VectorXd gamma = discount_factors(m, d);
    const auto rho = stationary_distribution(induce_chain(m, pi)).rho;
    const auto values = solve_q(m, pi, d);
    const auto n = gamma.size();
    GradientBalance out;
    out.lhs = expected_q_gradient(pi, rho, Eigen::VectorXd::Ones(n) - gamma, q_parameter_gradient(m, theta, d, h));
    out.rhs = rho.cwiseProduct(gamma).asDiagonal() * policy_score(pi, values);
    return out;
}

GradientBalance mixed_identity(const Mdp& m, const SoftmaxPolicy& theta, double gamma_c, double h) {
    if (!(gamma_c > 0.0 && gamma_c < 1.0)) throw std::invalid_argument("gamma_c must lie in (0,1)");
    const ConstantDiscount d{gamma_c};
    const auto pi = theta.probs();
    const auto rho = stationary_distribution(induce_chain(m, pi)).rho;
    const auto values = solve_q(m, pi, d);
    GradientBalance out;
    out.lhs = rho.asDiagonal() * policy_score(pi, values);
    out.rhs = ((1.0 - gamma_c) / gamma_c) *
              expected_q_gradient(pi, rho, Eigen::VectorXd::Ones(rho.size()), q_parameter_gradient(m, theta, d, h));
    return out;
}

double mixed_identity_check(const Mdp& m, const SoftmaxPolicy& theta, double gamma_c) {
    return mixed_identity(m, theta, gamma_c).residual();
}

double cosine_similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return na == nb ? 1.0 : 0.0;
    return a.cwiseProduct(b).sum() / (na * nb);
}

} // namespace episteady
