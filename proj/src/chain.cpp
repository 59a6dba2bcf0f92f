#include "episteady/chain.hpp"

#include "episteady/error.hpp"
#include "episteady/text.hpp"
#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

namespace episteady {

namespace {

using detail::restrict_to;
using detail::solve_linear;

std::vector<StateIndex> bfs(const SparseMatrix& m, const std::vector<StateIndex>& seeds,
                            const std::vector<bool>* blocked = nullptr) {
    std::vector<bool> seen(static_cast<std::size_t>(m.rows()), false);
    std::deque<StateIndex> queue;
    for (auto s : seeds)
        if (!seen[s]) {
            seen[s] = true;
            queue.push_back(s);
        }
    while (!queue.empty()) {
        const auto s = queue.front();
        queue.pop_front();
        if (blocked && (*blocked)[s]) continue;
        for (SparseMatrix::InnerIterator it(m, static_cast<Eigen::Index>(s)); it; ++it) {
            const auto t = static_cast<StateIndex>(it.col());
            if (it.value() > 0.0 && !seen[t]) {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    std::vector<StateIndex> out;
    for (StateIndex s = 0; s < seen.size(); ++s)
        if (seen[s]) out.push_back(s);
    return out;
}

std::vector<StateIndex> support(const Eigen::VectorXd& v) {
    std::vector<StateIndex> out;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v[i] > 0.0) out.push_back(static_cast<StateIndex>(i));
    return out;
}

// Iterative Tarjan over the subgraph induced by `nodes`; returns the component id per node
// (-1 outside the subgraph) and the component count.
std::pair<std::vector<long>, long> strongly_connected(const SparseMatrix& m, const std::vector<StateIndex>& nodes) {
    const auto n = static_cast<std::size_t>(m.rows());
    std::vector<bool> in_graph(n, false);
    for (auto s : nodes) in_graph[s] = true;

    std::vector<long> index(n, -1), low(n, 0), component(n, -1);
    std::vector<bool> on_stack(n, false);
    std::vector<StateIndex> stack;
    long next_index = 0, components = 0;

    struct Frame {
        StateIndex node;
        SparseMatrix::InnerIterator it;
    };
    for (auto root : nodes) {
        if (index[root] >= 0) continue;
        std::vector<Frame> call;
        auto open = [&](StateIndex v) {
            index[v] = low[v] = next_index++;
            stack.push_back(v);
            on_stack[v] = true;
            call.push_back({v, SparseMatrix::InnerIterator(m, static_cast<Eigen::Index>(v))});
        };
        open(root);
        while (!call.empty()) {
            auto& frame = call.back();
            const StateIndex v = frame.node;
            bool descended = false;
            for (; frame.it; ++frame.it) {
                const auto w = static_cast<StateIndex>(frame.it.col());
                if (frame.it.value() <= 0.0 || !in_graph[w]) continue;
                if (index[w] < 0) {
                    ++frame.it;
                    open(w);
                    descended = true;
                    break;
                }
                if (on_stack[w]) low[v] = std::min(low[v], index[w]);
            }
            if (descended) continue;
            if (low[v] == index[v]) {
                StateIndex w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    component[w] = components;
                } while (w != v);
                ++components;
            }
            call.pop_back();
            if (!call.empty()) {
                const StateIndex parent = call.back().node;
                low[parent] = std::min(low[parent], low[v]);
            }
        }
    }
    return {component, components};
}

// gcd of (level(u) + 1 - level(v)) over the edges of a closed class.
std::size_t class_period(const SparseMatrix& m, const std::vector<StateIndex>& cls) {
    std::vector<long> level(static_cast<std::size_t>(m.rows()), -1);
    std::deque<StateIndex> queue{cls.front()};
    level[cls.front()] = 0;
    long g = 0;
    while (!queue.empty()) {
        const auto u = queue.front();
        queue.pop_front();
        for (SparseMatrix::InnerIterator it(m, static_cast<Eigen::Index>(u)); it; ++it) {
            if (it.value() <= 0.0) continue;
            const auto v = static_cast<StateIndex>(it.col());
            if (level[v] < 0) {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                g = std::gcd(g, std::labs(level[u] + 1 - level[v]));
            }
        }
    }
    return static_cast<std::size_t>(g);
}

Distribution shared_terminal_row(const MarkovChain& c, const std::vector<StateIndex>& terminal_set) {
    if (terminal_set.empty()) throw Error(ErrorCode::NotEpisodic, "empty terminal set");
    return c.matrix.row(static_cast<Eigen::Index>(terminal_set.front())).transpose();
}

} // namespace

std::vector<StateIndex> reachable_set(const MarkovChain& c) {
    return bfs(c.matrix, support(c.start));
}

StationaryReport stationary_distribution(const MarkovChain& c) {
    StationaryReport report;
    report.reachable = reachable_set(c);
    const auto [component, count] = strongly_connected(c.matrix, report.reachable);
    report.irreducible_on_reachable = count == 1;

    // A component is closed when no positive edge leaves it.
    std::vector<bool> closed(static_cast<std::size_t>(count), true);
    for (auto s : report.reachable)
        for (SparseMatrix::InnerIterator it(c.matrix, static_cast<Eigen::Index>(s)); it; ++it)
            if (it.value() > 0.0 && component[static_cast<std::size_t>(it.col())] != component[s])
                closed[static_cast<std::size_t>(component[s])] = false;
    const auto closed_count = std::count(closed.begin(), closed.end(), true);
    if (closed_count != 1)
        throw Error(ErrorCode::NotIrreducible, "reachable states split into " + std::to_string(closed_count) +
                                                   " closed communicating classes");
    const auto closed_id = static_cast<long>(std::find(closed.begin(), closed.end(), true) - closed.begin());
    for (auto s : report.reachable)
        if (component[s] == closed_id) report.recurrent.push_back(s);

    // rho (P - I) = 0 with one balance equation replaced by sum(rho) = 1.
    const auto& cls = report.recurrent;
    const auto k = static_cast<Eigen::Index>(cls.size());
    const SparseMatrix p = restrict_to(c.matrix, cls);
    std::vector<Eigen::Triplet<double>> triplets;
    for (Eigen::Index i = 0; i < k; ++i)
        for (SparseMatrix::InnerIterator it(p, i); it; ++it)
            if (it.col() != k - 1) triplets.emplace_back(static_cast<int>(it.col()), static_cast<int>(i), it.value());
    for (Eigen::Index i = 0; i < k - 1; ++i) triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), -1.0);
    for (Eigen::Index j = 0; j < k; ++j) triplets.emplace_back(static_cast<int>(k - 1), static_cast<int>(j), 1.0);
    SparseMatrix a(k, k);
    a.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
    b[k - 1] = 1.0;
    Eigen::VectorXd local = solve_linear(a, b, ErrorCode::InternalInconsistency, "stationary balance system");
    local = local.cwiseMax(0.0);
    local /= local.sum();

    report.rho = Distribution::Zero(static_cast<Eigen::Index>(c.size()));
    for (Eigen::Index i = 0; i < k; ++i) report.rho[static_cast<Eigen::Index>(cls[static_cast<std::size_t>(i)])] = local[i];
    report.residual = (step_marginal(c, report.rho) - report.rho).lpNorm<Eigen::Infinity>();
    report.period = class_period(c.matrix, cls);
    report.aperiodic = report.period == 1;
    return report;
}

Distribution cesaro_average(const MarkovChain& c, std::size_t steps) {
    if (steps == 0) throw std::invalid_argument("cesaro_average needs at least one step");
    Distribution current = c.start;
    Distribution sum = Distribution::Zero(current.size());
    for (std::size_t t = 0; t < steps; ++t) {
        sum += current;
        current = step_marginal(c, current);
    }
    return sum / static_cast<double>(steps);
}

LimitResult limiting_distribution(const MarkovChain& c, double tol, std::size_t horizon) {
    const auto stationary = stationary_distribution(c);
    LimitResult result;
    result.previous = c.start;
    result.distribution = c.start;
    for (std::size_t t = 1; t <= horizon; ++t) {
        result.previous = std::move(result.distribution);
        result.distribution = step_marginal(c, result.previous);
        result.steps = t;
        result.change_tv = total_variation(result.distribution, result.previous);
        if (result.change_tv <= tol && total_variation(result.distribution, stationary.rho) <= 10.0 * tol) {
            result.outcome = LimitOutcome::Converged;
            return result;
        }
    }
    result.outcome = LimitOutcome::NotConvergedWithin;
    return result;
}

double mean_recurrence_time(const StationaryReport& report, StateIndex s) {
    if (s >= static_cast<StateIndex>(report.rho.size()) || !(report.rho[static_cast<Eigen::Index>(s)] > 0.0))
        throw Error(ErrorCode::UnreachableState, "state " + std::to_string(s) + " has no stationary mass");
    return 1.0 / report.rho[static_cast<Eigen::Index>(s)];
}

double expected_episode_length_stationary(const StationaryReport& report,
                                          const std::vector<StateIndex>& terminal_set) {
    double mass = 0.0;
    for (auto s : terminal_set) mass += report.rho[static_cast<Eigen::Index>(s)];
    if (!(mass > 0.0)) throw Error(ErrorCode::Divergent, "terminal set carries no stationary mass");
    return 1.0 / mass;
}

double expected_episode_length_absorbing(const MarkovChain& c, const std::vector<StateIndex>& terminal_set) {
    const Distribution r0 = shared_terminal_row(c, terminal_set);
    std::vector<bool> terminal(c.size(), false);
    for (auto s : terminal_set) terminal[s] = true;

    std::vector<StateIndex> transient;
    for (auto s : bfs(c.matrix, support(r0), &terminal))
        if (!terminal[s]) transient.push_back(s);
    const auto k = static_cast<Eigen::Index>(transient.size());
    if (k == 0) return 1.0;

    // (I - Q) h = 1, where Q is the chain restricted to the non-terminal states.
    SparseMatrix a = -restrict_to(c.matrix, transient);
    for (Eigen::Index i = 0; i < k; ++i) a.coeffRef(i, i) += 1.0;
    const Eigen::VectorXd h = solve_linear(a, Eigen::VectorXd::Ones(k), ErrorCode::Divergent,
                                           "absorbing hitting-time system");
    double expected = 1.0;
    for (Eigen::Index i = 0; i < k; ++i) expected += r0[static_cast<Eigen::Index>(transient[static_cast<std::size_t>(i)])] * h[i];
    return expected;
}

double expected_episode_length(const MarkovChain& c, const StationaryReport& report,
                               const std::vector<StateIndex>& terminal_set) {
    const double primary = expected_episode_length_stationary(report, terminal_set);
    const double oracle = expected_episode_length_absorbing(c, terminal_set);
    if (std::abs(primary - oracle) > 1e-8 * std::max(1.0, oracle))
        throw Error(ErrorCode::InternalInconsistency, "episode length " + format_double(primary) +
                                                          " from the stationary distribution vs " +
                                                          format_double(oracle) + " from hitting times");
    return primary;
}

double expected_episode_length(const MarkovChain& c, const std::vector<StateIndex>& terminal_set) {
    return expected_episode_length(c, stationary_distribution(c), terminal_set);
}

Eigen::VectorXd expected_episode_visits(const MarkovChain& c, const std::vector<StateIndex>& terminal_set,
                                        double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("discount must lie in [0,1]");
    const Distribution r0 = shared_terminal_row(c, terminal_set);
    std::vector<bool> terminal(c.size(), false);
    for (auto s : terminal_set) terminal[s] = true;

    std::vector<StateIndex> transient;
    for (auto s : bfs(c.matrix, support(r0), &terminal))
        if (!terminal[s]) transient.push_back(s);
    const auto k = static_cast<Eigen::Index>(transient.size());

    Eigen::VectorXd visits = r0;
    if (k == 0) return visits;
    // x_K = r0_K + gamma Q^T x_K on the non-terminal states; terminals collect the last step.
    const SparseMatrix q = restrict_to(c.matrix, transient);
    SparseMatrix a = SparseMatrix(-gamma * q.transpose());
    for (Eigen::Index i = 0; i < k; ++i) a.coeffRef(i, i) += 1.0;
    Eigen::VectorXd rhs(k);
    for (Eigen::Index i = 0; i < k; ++i) rhs[i] = r0[static_cast<Eigen::Index>(transient[static_cast<std::size_t>(i)])];
    const Eigen::VectorXd x = solve_linear(a, rhs, ErrorCode::Divergent, "discounted visit system");

    Eigen::VectorXd from_transient = Eigen::VectorXd::Zero(r0.size());
    for (Eigen::Index i = 0; i < k; ++i) from_transient[static_cast<Eigen::Index>(transient[static_cast<std::size_t>(i)])] = x[i];
    const Eigen::VectorXd next = c.matrix.transpose() * from_transient;
    for (Eigen::Index s = 0; s < visits.size(); ++s) {
        if (terminal[static_cast<std::size_t>(s)])
            visits[s] = r0[s] + gamma * next[s];
        else
            visits[s] = from_transient[s];
    }
    return visits;
}

EpisodeLengths coprime_episode_lengths(const MarkovChain& c, const std::vector<StateIndex>& terminal_set,
                                       std::size_t bound) {
    const Distribution r0 = shared_terminal_row(c, terminal_set);
    std::vector<bool> terminal(c.size(), false);
    for (auto s : terminal_set) terminal[s] = true;

    EpisodeLengths out;
    std::vector<bool> layer(c.size(), false);
    for (auto s : support(r0)) layer[s] = true;
    for (std::size_t k = 1; k <= bound; ++k) {
        bool hits_terminal = false, any_open = false;
        std::vector<bool> next(c.size(), false);
        for (StateIndex s = 0; s < c.size(); ++s) {
            if (!layer[s]) continue;
            if (terminal[s]) {
                hits_terminal = true;
                continue;
            }
            for (SparseMatrix::InnerIterator it(c.matrix, static_cast<Eigen::Index>(s)); it; ++it)
                if (it.value() > 0.0) {
                    next[static_cast<std::size_t>(it.col())] = true;
                    any_open = true;
                }
        }
        if (hits_terminal) out.lengths.push_back(k);
        if (!any_open) break;
        layer = std::move(next);
    }
    for (std::size_t i = 0; i < out.lengths.size() && !out.coprime_pair; ++i)
        for (std::size_t j = i + 1; j < out.lengths.size(); ++j)
            if (std::gcd(out.lengths[i], out.lengths[j]) == 1) {
                out.coprime_pair = std::pair{out.lengths[i], out.lengths[j]};
                break;
            }
    return out;
}

Distribution visitation_distribution(const Mdp& m, const TabularPolicy& pi, double gamma_c) {
    if (!(gamma_c >= 0.0 && gamma_c <= 1.0)) throw std::invalid_argument("gamma_c must lie in [0,1]");
    const auto closure = terminal_closure(m);
    if (!closure.homogeneity_ok) throw Error(ErrorCode::NotEpisodic, "model has no homogeneous terminal set");
    if (gamma_c == 1.0 && !check_finiteness(m, closure.terminal_set).ok)
        throw Error(ErrorCode::Divergent, "undiscounted visitation needs finite episodes under every policy");
    const auto chain = induce_chain(m, pi);
    Eigen::VectorXd visits = expected_episode_visits(chain, closure.terminal_set, gamma_c);
    return visits / visits.sum();
}

} // namespace episteady
