#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vscreen/chem.hpp"

namespace vscreen::fep {

class TooLarge : public std::runtime_error {
 public:
  explicit TooLarge(const std::string& msg) : std::runtime_error(msg) {}
};

class NotEnoughLigands : public std::runtime_error {
 public:
  NotEnoughLigands() : std::runtime_error("pairing needs at least 2 ligands") {}
};

class NonFiniteEnergy : public std::runtime_error {
 public:
  explicit NonFiniteEnergy(const std::string& msg) : std::runtime_error(msg) {}
};

class EmptySamples : public std::runtime_error {
 public:
  explicit EmptySamples(const std::string& msg) : std::runtime_error(msg) {}
};

// Injective atom correspondence a->b; mapped bonds are bonds of A whose
// image is a bond of B. The mapped subgraph of A is connected.
struct McsMapping {
  std::vector<std::pair<int, int>> atom_pairs;  // sorted by A index
  int mapped_bonds = 0;

  [[nodiscard]] int mapped_atoms() const { return static_cast<int>(atom_pairs.size()); }
};

// Exact maximum connected common subgraph, maximizing mapped bond count then
// mapped atom count; element labels must match on mapped atoms. Search runs
// branch-and-bound maximum clique (with pivoting and a greedy coloring
// bound) over the bond-pair modular product graph; ties resolve to the
// lexicographically smallest mapping. Inputs above 64 atoms are rejected.
McsMapping mcs(const chem::MolecularGraph& a, const chem::MolecularGraph& b);

struct CompoundPair {
  std::string ligand_a;
  std::string ligand_b;
  McsMapping mapping;
  int perturbation_size = 0;  // unmapped heavy atoms across both ligands
};

// Greedy maximum-weight matching on MCS mapped-atom counts; with an odd
// ligand count the leftover joins its highest-similarity neighbour as an
// extra pair.
std::vector<CompoundPair> pair_compounds(const std::vector<chem::Ligand>& ligands);

// Discrete lambda states 0..L over a 1D coordinate with per-state reduced
// potential u(lambda, x) in kT units.
struct AlchemicalModel {
  int num_states = 0;  // L + 1
  std::function<double(int, double)> u;
  double x_init = 0.0;  // sampling start
};

// u_l(x) = k_l (x - mu_l)^2 / 2 + c_l; analytic dF = dc + (ln(kL/k0)) / 2.
AlchemicalModel harmonic_family(std::vector<double> stiffness, std::vector<double> center,
                                std::vector<double> offset);
double harmonic_family_delta_f(const std::vector<double>& stiffness,
                               const std::vector<double>& offset);

struct AwhResult {
  double delta_f = 0.0;           // g_0 - g_L after the final stage
  std::vector<double> bias;       // final per-state bias
  std::vector<double> stage_gammas;     // gamma at each completed stage
  std::vector<double> stage_flatness;   // min/mean visit ratio at each transition
  long steps_used = 0;
};

// Flat-histogram biased Monte Carlo over (x, lambda): Metropolis x-moves
// (Gaussian width auto-tuned to 30-50% acceptance during a 1000-step
// burn-in), nearest-neighbour lambda hops, bias incremented per visit.
// When the lambda visit histogram is >= 80% flat the increment halves and
// the histogram resets; refinement stops below 1e-4 kT.
AwhResult awh_estimate(const AlchemicalModel& model, long steps, std::uint64_t seed);

struct FreeEnergyResult {
  double estimate = 0.0;  // kT
  double sem = 0.0;       // kT
  int replicas = 0;
  int bias_history_length = 0;  // stages of the deepest replica
  bool target_met = false;
};

// Runs independent replicas (replica i seeded by split(seed, i)) until the
// standard error of the mean drops to target_sem, or max_replicas is hit
// (then target_met stays false).
FreeEnergyResult run_until_sem(const std::function<double(std::uint64_t)>& estimator,
                               double target_sem, int max_replicas, std::uint64_t seed);
FreeEnergyResult run_until_sem_detailed(
    const std::function<std::pair<double, int>(std::uint64_t)>& estimator, double target_sem,
    int max_replicas, std::uint64_t seed);

// dG = (<Ec> - <Er> - <El>) + (dGsolv_c - dGsolv_r - dGsolv_l), kT units.
double abfe_estimate(std::span<const double> complex_samples,
                     std::span<const double> receptor_samples,
                     std::span<const double> ligand_samples, double solv_complex,
                     double solv_receptor, double solv_ligand);

}  // namespace vscreen::fep
