#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vscreen/chem.hpp"
#include "vscreen/geom.hpp"

namespace vscreen::dock {

enum class SiteKind { Steric, HBond, Lipophilic };

struct Site {
  Vec3 center;
  double weight = 1.0;
  double sigma = 1.0;
  SiteKind kind = SiteKind::Steric;
};

struct Box {
  Vec3 lo, hi;
  [[nodiscard]] bool empty() const { return hi.x <= lo.x || hi.y <= lo.y || hi.z <= lo.z; }
};

// Analytic pocket field: Gaussian attraction sites plus a softplus clash
// ramp against close atom pairs and the box walls.
struct Pocket {
  std::vector<Site> sites;
  Box bounds;
  double clash_radius = 0.8;
  double clash_penalty = 1.0;
};

struct Pose {
  std::string ligand_id;
  Vec3 translation;
  Quat rotation;                 // unit quaternion
  std::vector<double> torsions;  // radians, one per rotatable bond
  double geometric_score = 0.0;
  std::optional<double> rescore;
};

class AtomCountMismatch : public std::runtime_error {
 public:
  explicit AtomCountMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

class LengthMismatch : public std::runtime_error {
 public:
  explicit LengthMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

class EmptyBounds : public std::runtime_error {
 public:
  EmptyBounds() : std::runtime_error("pocket bounds box is empty") {}
};

// Which atoms rotate about each rotatable bond. Precomputed once per ligand;
// axes are listed in bond order.
struct TorsionTopology {
  struct Axis {
    int a = 0, b = 0;          // rotation axis runs a -> b
    std::vector<int> moving;   // atoms on b's side
  };
  std::vector<Axis> axes;
};

TorsionTopology torsion_topology(const chem::MolecularGraph& g);

// Torsions first (in axis order, about current local geometry), then the
// rigid transform x = R(q) p + t.
std::vector<Vec3> apply_pose(const chem::Conformer& conf, const TorsionTopology& topo,
                             const Pose& pose);

double geometric_score(const chem::Conformer& conf, const TorsionTopology& topo,
                       const Pose& pose, const Pocket& pocket);

// Score plus its gradient in pose parameters: analytic for translation and
// rotation (tangent-projected at the unit quaternion), central differences
// for torsions.
struct ScoreGradient {
  double score = 0.0;
  Vec3 translation;
  std::array<double, 4> rotation{};  // d/d(w, x, y, z)
  std::vector<double> torsions;
};

ScoreGradient score_gradient(const chem::Conformer& conf, const TorsionTopology& topo,
                             const Pose& pose, const Pocket& pocket);

// geometric_score plus kind-matched bonuses: hbond sites pair with N/O,
// lipophilic sites with C.
double rescore(const chem::MolecularGraph& g, const chem::Conformer& conf,
               const TorsionTopology& topo, const Pose& pose, const Pocket& pocket);

// Gradient ascent with diversity-promoting restarts. Starts are sampled
// uniformly (translation in bounds, rotation on S^3, torsions in [-pi, pi))
// and re-drawn (up to 50 times) while within RMSD diversity_delta of an
// already-found minimum; converged poses within diversity_delta of a kept
// pose are dropped, so the returned set is pairwise-diverse by construction.
// Result is sorted by geometric_score descending, length <= restarts.
std::vector<Pose> dock(const chem::Conformer& conf, const TorsionTopology& topo,
                       const Pocket& pocket, int restarts, double diversity_delta,
                       std::uint64_t seed, int max_steps = 500);

// Keep poses with geometric_score >= min_score, then the keep_top best by
// score; surviving poses stay in input order.
std::vector<Pose> filter_poses(const std::vector<Pose>& poses, std::size_t keep_top,
                               double min_score);

// No alignment; both coordinate sets share the pocket frame.
double rmsd(std::span<const Vec3> a, std::span<const Vec3> b);

double pose_rmsd(const chem::Conformer& conf, const TorsionTopology& topo, const Pose& a,
                 const Pose& b);

// Pocket JSON document: sites[], bounds {min, max}, clash_radius, clash_penalty.
Pocket load_pocket_file(const std::string& path);
Pocket parse_pocket_json(const std::string& text);
std::string pocket_to_json(const Pocket& pocket);

std::string pose_to_json(const Pose& pose);

}  // namespace vscreen::dock
