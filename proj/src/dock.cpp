#include "vscreen/dock.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "vscreen/rng.hpp"

namespace vscreen::dock {

namespace {

constexpr double kClashSharpness = 0.1;  // softplus ramp width
constexpr double kGradTol = 1e-6;
constexpr double kArmijoC = 1e-4;
constexpr double kInitialStep = 0.5;
constexpr double kShrink = 0.5;

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// Signed distance to the nearest wall (positive inside) and its gradient.
double wall_distance(const Box& box, const Vec3& p, Vec3* grad = nullptr) {
  const double d[6] = {p.x - box.lo.x, box.hi.x - p.x, p.y - box.lo.y,
                       box.hi.y - p.y, p.z - box.lo.z, box.hi.z - p.z};
  int best = 0;
  for (int i = 1; i < 6; ++i) {
    if (d[i] < d[best]) best = i;
  }
  if (grad) {
    static const Vec3 dirs[6] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                 {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    *grad = dirs[best];
  }
  return d[best];
}

struct PoseParams {
  Vec3 t;
  Quat q;
  std::vector<double> torsions;
};

std::vector<Vec3> transformed(const chem::Conformer& conf, const TorsionTopology& topo,
                              const PoseParams& p) {
  std::vector<Vec3> pts = conf.coords;
  for (std::size_t j = 0; j < topo.axes.size(); ++j) {
    const auto& axis = topo.axes[j];
    Vec3 origin = pts[axis.a];
    Vec3 dir = (pts[axis.b] - pts[axis.a]).normalized();
    Quat rot = Quat::from_axis_angle(dir, p.torsions[j]);
    for (int idx : axis.moving) {
      pts[idx] = origin + rot.rotate(pts[idx] - origin);
    }
  }
  Quat q = p.q.normalized();
  for (Vec3& v : pts) v = q.rotate(v) + p.t;
  return pts;
}

// Score of already-transformed positions; optionally accumulates d(score)/dx.
double score_positions(const std::vector<Vec3>& x, const Pocket& pocket,
                       std::vector<Vec3>* grad) {
  if (grad) grad->assign(x.size(), Vec3{});
  double s = 0.0;
  for (const Site& site : pocket.sites) {
    if (site.kind != SiteKind::Steric) continue;
    double inv2s2 = 1.0 / (2.0 * site.sigma * site.sigma);
    for (std::size_t a = 0; a < x.size(); ++a) {
      Vec3 d = x[a] - site.center;
      double val = site.weight * std::exp(-d.norm2() * inv2s2);
      s += val;
      if (grad) (*grad)[a] -= d * (val * 2.0 * inv2s2);
    }
  }
  const double lambda = pocket.clash_penalty;
  const double r = pocket.clash_radius;
  for (std::size_t a = 0; a < x.size(); ++a) {
    for (std::size_t b = a + 1; b < x.size(); ++b) {
      Vec3 d = x[a] - x[b];
      double dist = d.norm();
      double z = (r - dist) / kClashSharpness;
      s -= lambda * softplus(z);
      if (grad && dist > 1e-12) {
        Vec3 dg = d * (lambda * sigmoid(z) / (kClashSharpness * dist));
        (*grad)[a] += dg;
        (*grad)[b] -= dg;
      }
    }
    Vec3 wg;
    double w = wall_distance(pocket.bounds, x[a], &wg);
    double z = (r - w) / kClashSharpness;
    s -= lambda * softplus(z);
    if (grad) (*grad)[a] += wg * (lambda * sigmoid(z) / kClashSharpness);
  }
  return s;
}

struct Objective {
  const chem::Conformer& conf;
  const TorsionTopology& topo;
  const Pocket& pocket;

  [[nodiscard]] double eval(const PoseParams& p) const {
    return score_positions(transformed(conf, topo, p), pocket, nullptr);
  }

  // Analytic for translation and rotation, central differences for torsions.
  void grad(const PoseParams& p, Vec3& gt, double gq[4], std::vector<double>& gtor) const {
    // Positions before the rigid transform (torsions applied).
    PoseParams local = p;
    local.t = Vec3{};
    local.q = Quat{};
    std::vector<Vec3> y = transformed(conf, topo, local);

    Quat q = p.q.normalized();
    std::vector<Vec3> x(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) x[i] = q.rotate(y[i]) + p.t;

    std::vector<Vec3> gx;
    score_positions(x, pocket, &gx);

    gt = Vec3{};
    for (const Vec3& g : gx) gt += g;

    // d(R(q) y)/dq at unit q, then projected onto the tangent of S^3.
    double raw[4] = {0, 0, 0, 0};
    Vec3 u{q.x, q.y, q.z};
    static const Vec3 e[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (std::size_t i = 0; i < y.size(); ++i) {
      const Vec3& v = y[i];
      const Vec3& g = gx[i];
      raw[0] += g.dot(2.0 * u.cross(v));
      for (int j = 0; j < 3; ++j) {
        Vec3 dv = 2.0 * q.w * e[j].cross(v) + 2.0 * e[j].cross(u.cross(v)) +
                  2.0 * u.cross(e[j].cross(v));
        raw[j + 1] += g.dot(dv);
      }
    }
    double qv[4] = {q.w, q.x, q.y, q.z};
    double radial = raw[0] * qv[0] + raw[1] * qv[1] + raw[2] * qv[2] + raw[3] * qv[3];
    for (int j = 0; j < 4; ++j) gq[j] = raw[j] - radial * qv[j];

    gtor.assign(p.torsions.size(), 0.0);
    const double h = 1e-5;
    for (std::size_t j = 0; j < p.torsions.size(); ++j) {
      PoseParams hi = p, lo = p;
      hi.torsions[j] += h;
      lo.torsions[j] -= h;
      gtor[j] = (eval(hi) - eval(lo)) / (2.0 * h);
    }
  }
};

struct AscentResult {
  PoseParams params;
  double score;
};

AscentResult ascend(const Objective& obj, PoseParams p, int max_steps) {
  p.q = p.q.normalized();
  double s = obj.eval(p);
  Vec3 gt;
  double gq[4];
  std::vector<double> gtor;
  for (int step = 0; step < max_steps; ++step) {
    obj.grad(p, gt, gq, gtor);
    double gn2 = gt.norm2() + gq[0] * gq[0] + gq[1] * gq[1] + gq[2] * gq[2] + gq[3] * gq[3];
    for (double g : gtor) gn2 += g * g;
    if (std::sqrt(gn2) < kGradTol) break;

    double alpha = kInitialStep;
    bool accepted = false;
    while (alpha > 1e-14) {
      PoseParams trial = p;
      trial.t += gt * alpha;
      trial.q.w += gq[0] * alpha;
      trial.q.x += gq[1] * alpha;
      trial.q.y += gq[2] * alpha;
      trial.q.z += gq[3] * alpha;
      trial.q = trial.q.normalized();
      for (std::size_t j = 0; j < gtor.size(); ++j) trial.torsions[j] += gtor[j] * alpha;
      double st = obj.eval(trial);
      if (st >= s + kArmijoC * alpha * gn2) {
        p = std::move(trial);
        s = st;
        accepted = true;
        break;
      }
      alpha *= kShrink;
    }
    if (!accepted) break;
  }
  return {std::move(p), s};
}

PoseParams params_of(const Pose& pose) {
  return {pose.translation, pose.rotation, pose.torsions};
}

Pose pose_of(const PoseParams& p, std::string ligand_id, double score) {
  Pose pose;
  pose.ligand_id = std::move(ligand_id);
  pose.translation = p.t;
  pose.rotation = p.q.normalized();
  pose.torsions = p.torsions;
  pose.geometric_score = score;
  return pose;
}

void check_counts(const chem::Conformer& conf, const TorsionTopology& topo, const Pose& pose) {
  if (pose.torsions.size() != topo.axes.size()) {
    throw AtomCountMismatch("pose has " + std::to_string(pose.torsions.size()) +
                            " torsions, topology has " + std::to_string(topo.axes.size()));
  }
  for (const auto& axis : topo.axes) {
    if (axis.a >= static_cast<int>(conf.coords.size()) ||
        axis.b >= static_cast<int>(conf.coords.size())) {
      throw AtomCountMismatch("torsion topology does not fit conformer");
    }
  }
}

}  // namespace

TorsionTopology torsion_topology(const chem::MolecularGraph& g) {
  TorsionTopology topo;
  std::vector<int> deg = g.degrees();
  std::vector<bool> ring =
      g.ring_bond_flags.size() == g.bonds.size() ? g.ring_bond_flags : chem::compute_ring_bonds(g);
  std::vector<std::vector<int>> adj(g.atoms.size());
  for (const chem::Bond& b : g.bonds) {
    adj[b.a].push_back(b.b);
    adj[b.b].push_back(b.a);
  }
  for (std::size_t e = 0; e < g.bonds.size(); ++e) {
    const chem::Bond& b = g.bonds[e];
    if (b.order != chem::BondOrder::Single || ring[e]) continue;
    if (deg[b.a] < 2 || deg[b.b] < 2) continue;
    TorsionTopology::Axis axis;
    axis.a = b.a;
    axis.b = b.b;
    // Everything reachable from b without crossing the bond moves.
    std::vector<bool> seen(g.atoms.size(), false);
    seen[b.a] = seen[b.b] = true;
    std::vector<int> stack{b.b};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj[v]) {
        if (!seen[w]) {
          seen[w] = true;
          axis.moving.push_back(w);
          stack.push_back(w);
        }
      }
    }
    std::sort(axis.moving.begin(), axis.moving.end());
    topo.axes.push_back(std::move(axis));
  }
  return topo;
}

std::vector<Vec3> apply_pose(const chem::Conformer& conf, const TorsionTopology& topo,
                             const Pose& pose) {
  check_counts(conf, topo, pose);
  return transformed(conf, topo, params_of(pose));
}

double geometric_score(const chem::Conformer& conf, const TorsionTopology& topo,
                       const Pose& pose, const Pocket& pocket) {
  check_counts(conf, topo, pose);
  return score_positions(transformed(conf, topo, params_of(pose)), pocket, nullptr);
}

ScoreGradient score_gradient(const chem::Conformer& conf, const TorsionTopology& topo,
                             const Pose& pose, const Pocket& pocket) {
  check_counts(conf, topo, pose);
  Objective obj{conf, topo, pocket};
  PoseParams p = params_of(pose);
  ScoreGradient out;
  out.score = obj.eval(p);
  double gq[4];
  obj.grad(p, out.translation, gq, out.torsions);
  out.rotation = {gq[0], gq[1], gq[2], gq[3]};
  return out;
}

double rescore(const chem::MolecularGraph& g, const chem::Conformer& conf,
               const TorsionTopology& topo, const Pose& pose, const Pocket& pocket) {
  if (g.atom_count() != static_cast<int>(conf.coords.size())) {
    throw AtomCountMismatch("graph and conformer disagree on atom count");
  }
  double s = geometric_score(conf, topo, pose, pocket);
  std::vector<Vec3> x = transformed(conf, topo, params_of(pose));
  for (const Site& site : pocket.sites) {
    if (site.kind == SiteKind::Steric) continue;
    double inv2s2 = 1.0 / (2.0 * site.sigma * site.sigma);
    for (int a = 0; a < g.atom_count(); ++a) {
      const std::string& el = g.atoms[static_cast<std::size_t>(a)].element;
      bool match = site.kind == SiteKind::HBond ? (el == "N" || el == "O") : (el == "C");
      if (!match) continue;
      Vec3 d = x[static_cast<std::size_t>(a)] - site.center;
      s += site.weight * std::exp(-d.norm2() * inv2s2);
    }
  }
  return s;
}

std::vector<Pose> dock(const chem::Conformer& conf, const TorsionTopology& topo,
                       const Pocket& pocket, int restarts, double diversity_delta,
                       std::uint64_t seed, int max_steps) {
  if (pocket.bounds.empty()) throw EmptyBounds();
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (diversity_delta < 0.0) throw std::invalid_argument("diversity_delta must be >= 0");
  if (conf.coords.empty()) throw AtomCountMismatch("conformer has no atoms");

  Objective obj{conf, topo, pocket};
  Rng root(seed);

  struct Kept {
    Pose pose;
    std::vector<Vec3> coords;
  };
  std::vector<Kept> kept;

  auto diverse_from_kept = [&](const std::vector<Vec3>& coords) {
    for (const Kept& k : kept) {
      if (rmsd(coords, k.coords) < diversity_delta) return false;
    }
    return true;
  };

  for (int r = 0; r < restarts; ++r) {
    Rng rng = root.split(static_cast<std::uint64_t>(r));
    PoseParams start;
    for (int attempt = 0; attempt < 50; ++attempt) {
      start.t = {rng.uniform(pocket.bounds.lo.x, pocket.bounds.hi.x),
                 rng.uniform(pocket.bounds.lo.y, pocket.bounds.hi.y),
                 rng.uniform(pocket.bounds.lo.z, pocket.bounds.hi.z)};
      Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
      start.q = q.norm() > 1e-12 ? q.normalized() : Quat{};
      start.torsions.assign(topo.axes.size(), 0.0);
      for (double& th : start.torsions) {
        th = rng.uniform(-3.14159265358979323846, 3.14159265358979323846);
      }
      if (diverse_from_kept(transformed(conf, topo, start))) break;
    }

    AscentResult res = ascend(obj, std::move(start), max_steps);
    std::vector<Vec3> coords = transformed(conf, topo, res.params);
    if (!diverse_from_kept(coords)) continue;
    kept.push_back({pose_of(res.params, conf.ligand_id, res.score), std::move(coords)});
  }

  std::stable_sort(kept.begin(), kept.end(), [](const Kept& a, const Kept& b) {
    return a.pose.geometric_score > b.pose.geometric_score;
  });
  std::vector<Pose> out;
  out.reserve(kept.size());
  for (Kept& k : kept) out.push_back(std::move(k.pose));
  return out;
}

std::vector<Pose> filter_poses(const std::vector<Pose>& poses, std::size_t keep_top,
                               double min_score) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (poses[i].geometric_score >= min_score) idx.push_back(i);
  }
  if (idx.size() > keep_top) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return poses[a].geometric_score > poses[b].geometric_score;
    });
    idx.resize(keep_top);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<Pose> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(poses[i]);
  return out;
}

double rmsd(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.size() != b.size()) {
    throw LengthMismatch("coordinate sets have different lengths: " +
                         std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).norm2();
  return std::sqrt(sum / static_cast<double>(a.size()));
}

double pose_rmsd(const chem::Conformer& conf, const TorsionTopology& topo, const Pose& a,
                 const Pose& b) {
  return rmsd(apply_pose(conf, topo, a), apply_pose(conf, topo, b));
}

namespace {

SiteKind kind_from_string(const std::string& s) {
  if (s == "steric") return SiteKind::Steric;
  if (s == "hbond") return SiteKind::HBond;
  if (s == "lipophilic") return SiteKind::Lipophilic;
  throw std::runtime_error("unknown site kind: " + s);
}

const char* kind_to_string(SiteKind k) {
  switch (k) {
    case SiteKind::Steric: return "steric";
    case SiteKind::HBond: return "hbond";
    case SiteKind::Lipophilic: return "lipophilic";
  }
  return "steric";
}

Vec3 vec_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

Pocket parse_pocket_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Pocket p;
  for (const auto& js : j.at("sites")) {
    Site s;
    s.center = vec_from_json(js.at("center"));
    s.weight = js.at("weight").get<double>();
    s.sigma = js.at("sigma").get<double>();
    s.kind = kind_from_string(js.at("kind").get<std::string>());
    if (s.sigma <= 0.0) throw std::runtime_error("site sigma must be > 0");
    p.sites.push_back(s);
  }
  p.bounds.lo = vec_from_json(j.at("bounds").at("min"));
  p.bounds.hi = vec_from_json(j.at("bounds").at("max"));
  p.clash_radius = j.at("clash_radius").get<double>();
  p.clash_penalty = j.at("clash_penalty").get<double>();
  if (p.clash_penalty < 0.0) throw std::runtime_error("clash_penalty must be >= 0");
  return p;
}

Pocket load_pocket_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pocket file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_pocket_json(buf.str());
}

std::string pocket_to_json(const Pocket& pocket) {
  nlohmann::ordered_json j;
  j["sites"] = nlohmann::ordered_json::array();
  for (const Site& s : pocket.sites) {
    j["sites"].push_back({{"center", {s.center.x, s.center.y, s.center.z}},
                          {"weight", s.weight},
                          {"sigma", s.sigma},
                          {"kind", kind_to_string(s.kind)}});
  }
  j["bounds"] = {{"min", {pocket.bounds.lo.x, pocket.bounds.lo.y, pocket.bounds.lo.z}},
                 {"max", {pocket.bounds.hi.x, pocket.bounds.hi.y, pocket.bounds.hi.z}}};
  j["clash_radius"] = pocket.clash_radius;
  j["clash_penalty"] = pocket.clash_penalty;
  return j.dump(2);
}

std::string pose_to_json(const Pose& pose) {
  nlohmann::ordered_json j;
  j["ligand"] = pose.ligand_id;
  j["translation"] = {pose.translation.x, pose.translation.y, pose.translation.z};
  j["rotation"] = {pose.rotation.w, pose.rotation.x, pose.rotation.y, pose.rotation.z};
  j["torsions"] = pose.torsions;
  j["geometric_score"] = pose.geometric_score;
  if (pose.rescore) {
    j["rescore"] = *pose.rescore;
  } else {
    j["rescore"] = nullptr;
  }
  return j.dump();
}

}  // namespace vscreen::dock
