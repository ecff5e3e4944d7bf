#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vscreen::tune {

class InvalidConfig : public std::runtime_error {
 public:
  explicit InvalidConfig(const std::string& msg) : std::runtime_error(msg) {}
};

struct Knob {
  std::string name;
  std::vector<double> domain;  // ordered finite values
};

// Exactly 11 discrete knobs; the shipped default space has cardinality
// above 60 million.
struct KnobSpace {
  std::vector<Knob> knobs;

  [[nodiscard]] std::size_t dims() const { return knobs.size(); }
  [[nodiscard]] double cardinality() const;
  void validate() const;  // 11 knobs, non-empty ordered domains
};

using Config = std::vector<double>;  // one value per knob

struct Observation {
  Config config;
  double quality = 0.0;  // lower is better (RMSD-like)
  double cost = 0.0;     // seconds, >= 0
};

// Throws InvalidConfig unless every value sits in its knob's domain.
void check_config(const KnobSpace& space, const Config& config);

// Knob values normalized to [0,1] by domain index.
std::vector<double> normalize(const KnobSpace& space, const Config& config);

class Objective {
 public:
  virtual ~Objective() = default;
  virtual Observation evaluate(const Config& config) = 0;
};

// Separable quadratic over normalized coordinates plus one pairwise
// interaction term and optional seeded noise; the argmin is a known grid
// point with value 0 (before noise). Deterministic: the noise is a pure
// function of (config, seed).
class SyntheticSurface : public Objective {
 public:
  SyntheticSurface(const KnobSpace& space, std::uint64_t seed, double noise_sigma = 0.0);

  Observation evaluate(const Config& config) override;
  [[nodiscard]] const Config& optimum() const { return optimum_; }
  [[nodiscard]] double optimum_value() const { return 0.0; }

 private:
  const KnobSpace& space_;
  std::uint64_t seed_;
  double noise_sigma_;
  Config optimum_;
  std::vector<double> opt_z_;
  std::vector<double> quad_coeff_;
  std::vector<double> cost_weight_;
  double interaction_ = 0.5;
};

Observation evaluate(const KnobSpace& space, const Config& config, Objective& objective);

// MALIBOO-style stand-in: after 8 space-filling seeded samples, a
// distance-weighted Gaussian-kernel surrogate (bandwidth = median pairwise
// distance) predicts quality and cost; expected improvement is maximized
// over 1024 seeded candidates subject to predicted cost <= budget, with
// max-min-distance exploration when EI vanishes and a cheapest-predicted
// fallback when no candidate meets the budget.
Config suggest_next(const KnobSpace& space, const std::vector<Observation>& history,
                    double budget_cost, std::uint64_t seed);

// Non-dominated set under (quality down, cost down), sorted by cost
// ascending, exact (quality, cost) duplicates collapsed.
std::vector<Observation> pareto_front(const std::vector<Observation>& history);

KnobSpace load_space_file(const std::string& path);
std::string space_to_json(const KnobSpace& space);

}  // namespace vscreen::tune
