#pragma once

#include "episteady/mdp.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace episteady {

enum class PerturbationMode { Single, Recursive };

std::string_view to_string(PerturbationMode mode);

/// The model's discount is a per-state table: the base factors followed by gamma(null) = 1.
struct PerturbedMdp {
    Mdp model;            // base states followed by the null state
    double epsilon = 0.0;
    PerturbationMode mode = PerturbationMode::Single;
    StateIndex null_state = 0; // always the last index
};

/// Terminal rows become (1-eps) r0 + eps -> null; the null row is r0.
/// Throws Error(NotEpisodic) or Error(EpsOutOfRange) unless 0 < eps < 1.
PerturbedMdp epsilon_perturb(const Mdp& m, double eps);

/// Terminal rows as above; the null row keeps eps on itself and sends (1-eps) r0 back.
/// Expected null dwell per episode is eps / (1 - eps).
PerturbedMdp recursive_perturb(const Mdp& m, double eps);

PerturbedMdp perturb(const Mdp& m, double eps, PerturbationMode mode);

/// rho(s) = rho+(s) / (1 - rho+(null)) on the base states.
/// Throws Error(DegenerateNullMass) if rho+(null) >= 1 - 1e-12.
Distribution recover_stationary(const Distribution& rho_plus, StateIndex null_state);

/// Appends a uniform action row for the null state.
TabularPolicy extend_policy(const TabularPolicy& pi);

/// max over base (s,a) of |Q(s,a) - Q+(s,a)|, base under episodic discounting and the
/// perturbed model under its own discount table.
double check_value_preservation(const Mdp& m, const PerturbedMdp& p, const TabularPolicy& pi);

struct CoupledRun {
    std::vector<StateIndex> zeta;      // base trajectory s_0..s_H
    std::vector<StateIndex> zeta_plus; // zeta with nulls inserted after chosen terminal visits
    std::vector<StateIndex> z;         // z_t = s_{t - delta_t}, t = 0..H
    std::vector<std::size_t> delta;    // nulls among zeta_plus[0..t-1]
    StateIndex null_state = 0;
};

/// Deterministic part of the coupling: insert_after[t] requests a null right after zeta[t]
/// (honoured only when zeta[t] is terminal).
CoupledRun couple_trajectory(const std::vector<StateIndex>& zeta, const std::vector<bool>& terminal,
                             const std::vector<bool>& insert_after, StateIndex null_state);

/// Base rollout on stream (seed, 0); one coin per terminal visit from a separate stream.
/// eps = 0 is allowed and yields zeta_plus == zeta.
CoupledRun coupled_sample(const Mdp& m, const TabularPolicy& pi, double eps, std::uint64_t seed,
                          std::size_t horizon);

/// Columns t,base,perturbed for t = 0..H.
void write_coupled_csv(std::ostream& out, const CoupledRun& run, const std::vector<std::string>& base_names);

} // namespace episteady
