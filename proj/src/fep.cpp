#include "vscreen/fep.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>

#include "vscreen/rng.hpp"

namespace vscreen::fep {

namespace {

// ---------------------------------------------------------------------------
// Maximum common connected subgraph via branch-and-bound maximum clique over
// the bond-pair modular product graph. Each product vertex is one oriented
// (bond of A, bond of B) correspondence; a clique is a consistent set of
// mapped bonds; c-edges (shared atom correspondence) keep the subgraph
// connected.
// ---------------------------------------------------------------------------

struct Bits {
  std::vector<std::uint64_t> w;

  explicit Bits(std::size_t n = 0) : w((n + 63) / 64, 0) {}
  void set(std::size_t i) { w[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void reset(std::size_t i) { w[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
  [[nodiscard]] bool test(std::size_t i) const {
    return (w[i >> 6] >> (i & 63)) & 1;
  }
  [[nodiscard]] bool empty() const {
    for (std::uint64_t x : w) {
      if (x) return false;
    }
    return true;
  }
  [[nodiscard]] std::size_t count() const {
    std::size_t c = 0;
    for (std::uint64_t x : w) c += static_cast<std::size_t>(std::popcount(x));
    return c;
  }
  Bits& operator&=(const Bits& o) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] &= o.w[i];
    return *this;
  }
  Bits& operator|=(const Bits& o) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] |= o.w[i];
    return *this;
  }
  [[nodiscard]] Bits and_(const Bits& o) const {
    Bits r = *this;
    r &= o;
    return r;
  }
  [[nodiscard]] Bits and_not(const Bits& o) const {
    Bits r = *this;
    for (std::size_t i = 0; i < w.size(); ++i) r.w[i] &= ~o.w[i];
    return r;
  }
  // First set bit at or after `from`, or -1.
  [[nodiscard]] int next(std::size_t from) const {
    std::size_t word = from >> 6;
    if (word >= w.size()) return -1;
    std::uint64_t cur = w[word] & (~std::uint64_t{0} << (from & 63));
    for (;;) {
      if (cur) return static_cast<int>((word << 6) + static_cast<std::size_t>(std::countr_zero(cur)));
      if (++word >= w.size()) return -1;
      cur = w[word];
    }
  }
};

struct ProductVertex {
  int a1, a2;  // A atoms, a1 < a2
  int b1, b2;  // images: a1 -> b1, a2 -> b2
};

struct McsSearch {
  std::vector<ProductVertex> verts;
  std::vector<Bits> nbr;   // compatible (c or d)
  std::vector<Bits> cnbr;  // compatible and sharing an atom correspondence
  int best_bonds = 0;
  int best_atoms = 0;
  std::vector<std::pair<int, int>> best_pairs;
  std::vector<int> clique;

  void consider_leaf() {
    int bonds = static_cast<int>(clique.size());
    if (bonds < best_bonds) return;
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(clique.size() * 2);
    for (int v : clique) {
      pairs.emplace_back(verts[static_cast<std::size_t>(v)].a1,
                         verts[static_cast<std::size_t>(v)].b1);
      pairs.emplace_back(verts[static_cast<std::size_t>(v)].a2,
                         verts[static_cast<std::size_t>(v)].b2);
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    int atoms = static_cast<int>(pairs.size());
    if (bonds > best_bonds || (bonds == best_bonds && atoms > best_atoms) ||
        (bonds == best_bonds && atoms == best_atoms &&
         (best_pairs.empty() || pairs < best_pairs))) {
      best_bonds = bonds;
      best_atoms = atoms;
      best_pairs = std::move(pairs);
    }
  }

  // Greedy coloring upper bound on any clique inside `cand`.
  [[nodiscard]] int color_bound(const Bits& cand) const {
    std::vector<Bits> classes;
    for (int v = cand.next(0); v >= 0; v = cand.next(static_cast<std::size_t>(v) + 1)) {
      bool placed = false;
      for (Bits& cls : classes) {
        bool conflict = false;
        const Bits& nv = nbr[static_cast<std::size_t>(v)];
        for (std::size_t i = 0; i < cls.w.size(); ++i) {
          if (cls.w[i] & nv.w[i]) {
            conflict = true;
            break;
          }
        }
        if (!conflict) {
          cls.set(static_cast<std::size_t>(v));
          placed = true;
          break;
        }
      }
      if (!placed) {
        classes.emplace_back(nbr.empty() ? Bits(0) : Bits(verts.size()));
        classes.back().set(static_cast<std::size_t>(v));
      }
    }
    return static_cast<int>(classes.size());
  }

  void expand(Bits P, const Bits& D) {
    if (P.empty()) {
      consider_leaf();
      return;
    }
    Bits all = P;
    all |= D;
    int bound = static_cast<int>(clique.size()) + color_bound(all);
    if (bound < best_bonds) return;  // ties still explored for the tie-break

    // Pivot on the P vertex with the most P-neighbours.
    int pivot = -1;
    std::size_t pivot_deg = 0;
    for (int v = P.next(0); v >= 0; v = P.next(static_cast<std::size_t>(v) + 1)) {
      std::size_t d = P.and_(nbr[static_cast<std::size_t>(v)]).count();
      if (pivot < 0 || d > pivot_deg) {
        pivot = v;
        pivot_deg = d;
      }
    }
    Bits branch = P.and_not(nbr[static_cast<std::size_t>(pivot)]);

    for (int u = branch.next(0); u >= 0; u = branch.next(static_cast<std::size_t>(u) + 1)) {
      if (!P.test(static_cast<std::size_t>(u))) continue;  // excluded earlier in this loop
      const Bits& nu = nbr[static_cast<std::size_t>(u)];
      const Bits& cu = cnbr[static_cast<std::size_t>(u)];
      Bits newP = P.and_(nu);
      newP |= D.and_(nu).and_(cu);
      newP.reset(static_cast<std::size_t>(u));
      Bits newD = D.and_(nu).and_not(cu);
      clique.push_back(u);
      expand(std::move(newP), newD);
      clique.pop_back();
      P.reset(static_cast<std::size_t>(u));
    }
  }
};

bool consistent(const ProductVertex& v, const ProductVertex& w, bool& shares_atom) {
  const std::pair<int, int> pv[2] = {{v.a1, v.b1}, {v.a2, v.b2}};
  const std::pair<int, int> pw[2] = {{w.a1, w.b1}, {w.a2, w.b2}};
  shares_atom = false;
  for (const auto& [x, y] : pv) {
    for (const auto& [x2, y2] : pw) {
      if ((x == x2) != (y == y2)) return false;
      if (x == x2) shares_atom = true;
    }
  }
  return true;
}

}  // namespace

McsMapping mcs(const chem::MolecularGraph& a, const chem::MolecularGraph& b) {
  constexpr int kMaxAtoms = 64;
  if (a.atom_count() > kMaxAtoms || b.atom_count() > kMaxAtoms) {
    throw TooLarge("mcs inputs are limited to 64 atoms");
  }

  McsSearch s;
  for (const chem::Bond& ea : a.bonds) {
    int x1 = std::min(ea.a, ea.b);
    int x2 = std::max(ea.a, ea.b);
    const std::string& ex1 = a.atoms[static_cast<std::size_t>(x1)].element;
    const std::string& ex2 = a.atoms[static_cast<std::size_t>(x2)].element;
    for (const chem::Bond& eb : b.bonds) {
      const std::string& ep = b.atoms[static_cast<std::size_t>(eb.a)].element;
      const std::string& eq = b.atoms[static_cast<std::size_t>(eb.b)].element;
      if (ex1 == ep && ex2 == eq) s.verts.push_back({x1, x2, eb.a, eb.b});
      if (ex1 == eq && ex2 == ep) s.verts.push_back({x1, x2, eb.b, eb.a});
    }
  }

  const std::size_t n = s.verts.size();
  s.nbr.assign(n, Bits(n));
  s.cnbr.assign(n, Bits(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      bool shares = false;
      if (!consistent(s.verts[i], s.verts[j], shares)) continue;
      // Each bond of A and of B may be mapped at most once.
      bool same_a = s.verts[i].a1 == s.verts[j].a1 && s.verts[i].a2 == s.verts[j].a2;
      bool same_b = (std::min(s.verts[i].b1, s.verts[i].b2) ==
                     std::min(s.verts[j].b1, s.verts[j].b2)) &&
                    (std::max(s.verts[i].b1, s.verts[i].b2) ==
                     std::max(s.verts[j].b1, s.verts[j].b2));
      if (same_a || same_b) continue;
      s.nbr[i].set(j);
      s.nbr[j].set(i);
      if (shares) {
        s.cnbr[i].set(j);
        s.cnbr[j].set(i);
      }
    }
  }

  // Single-atom fallback: the lexicographically smallest compatible pair.
  for (int i = 0; i < a.atom_count() && s.best_pairs.empty(); ++i) {
    for (int j = 0; j < b.atom_count(); ++j) {
      if (a.atoms[static_cast<std::size_t>(i)].element ==
          b.atoms[static_cast<std::size_t>(j)].element) {
        s.best_pairs = {{i, j}};
        s.best_atoms = 1;
        break;
      }
    }
  }

  Bits allowed(n);
  for (std::size_t i = 0; i < n; ++i) allowed.set(i);
  for (std::size_t v = 0; v < n; ++v) {
    allowed.reset(v);
    Bits P = s.cnbr[v].and_(allowed);
    Bits D = s.nbr[v].and_not(s.cnbr[v]).and_(allowed);
    s.clique.assign(1, static_cast<int>(v));
    s.expand(std::move(P), D);
  }

  McsMapping m;
  m.atom_pairs = std::move(s.best_pairs);
  m.mapped_bonds = s.best_bonds;
  return m;
}

std::vector<CompoundPair> pair_compounds(const std::vector<chem::Ligand>& ligands) {
  const std::size_t n = ligands.size();
  if (n < 2) throw NotEnoughLigands();

  // Order indices by ligand id so pair keys are canonical.
  std::vector<std::size_t> by_id(n);
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::sort(by_id.begin(), by_id.end(), [&](std::size_t x, std::size_t y) {
    return ligands[x].id < ligands[y].id;
  });

  struct Edge {
    int weight;
    std::size_t i, j;  // into by_id order, i < j
    McsMapping mapping;
  };
  std::vector<Edge> edges;
  std::map<std::pair<std::size_t, std::size_t>, const McsMapping*> mapping_of;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      McsMapping m = mcs(ligands[by_id[i]].graph, ligands[by_id[j]].graph);
      edges.push_back({m.mapped_atoms(), i, j, std::move(m)});
    }
  }
  std::sort(edges.begin(), edges.end(), [&](const Edge& a, const Edge& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    const std::string& ai = ligands[by_id[a.i]].id;
    const std::string& bi = ligands[by_id[b.i]].id;
    if (ai != bi) return ai < bi;
    return ligands[by_id[a.j]].id < ligands[by_id[b.j]].id;
  });
  for (const Edge& e : edges) mapping_of[{e.i, e.j}] = &e.mapping;

  auto make_pair_result = [&](std::size_t i, std::size_t j, const McsMapping& m) {
    const chem::Ligand& la = ligands[by_id[i]];
    const chem::Ligand& lb = ligands[by_id[j]];
    CompoundPair p;
    p.ligand_a = la.id;
    p.ligand_b = lb.id;
    p.mapping = m;
    p.perturbation_size =
        (la.heavy_atoms - m.mapped_atoms()) + (lb.heavy_atoms - m.mapped_atoms());
    return p;
  };

  std::vector<bool> matched(n, false);
  std::vector<CompoundPair> out;
  for (const Edge& e : edges) {
    if (matched[e.i] || matched[e.j]) continue;
    matched[e.i] = matched[e.j] = true;
    out.push_back(make_pair_result(e.i, e.j, e.mapping));
  }

  if (n % 2 == 1) {
    std::size_t leftover = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!matched[i]) leftover = i;
    }
    // Highest-similarity neighbour, ties to the lowest id.
    int best_w = -1;
    std::size_t best = leftover;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == leftover) continue;
      auto key = std::minmax(leftover, j);
      const McsMapping* m = mapping_of[{key.first, key.second}];
      if (m->mapped_atoms() > best_w) {
        best_w = m->mapped_atoms();
        best = j;
      }
    }
    auto key = std::minmax(leftover, best);
    out.push_back(make_pair_result(key.first, key.second, *mapping_of[{key.first, key.second}]));
  }
  return out;
}

AlchemicalModel harmonic_family(std::vector<double> stiffness, std::vector<double> center,
                                std::vector<double> offset) {
  if (stiffness.size() < 2 || stiffness.size() != center.size() ||
      stiffness.size() != offset.size()) {
    throw std::invalid_argument("harmonic family needs >= 2 states with equal-length params");
  }
  for (double k : stiffness) {
    if (k <= 0.0) throw std::invalid_argument("harmonic stiffness must be > 0");
  }
  AlchemicalModel m;
  m.num_states = static_cast<int>(stiffness.size());
  m.x_init = center[0];
  m.u = [k = std::move(stiffness), mu = std::move(center),
         c = std::move(offset)](int l, double x) {
    double d = x - mu[static_cast<std::size_t>(l)];
    return 0.5 * k[static_cast<std::size_t>(l)] * d * d + c[static_cast<std::size_t>(l)];
  };
  return m;
}

double harmonic_family_delta_f(const std::vector<double>& stiffness,
                               const std::vector<double>& offset) {
  std::size_t last = stiffness.size() - 1;
  return (offset[last] - offset[0]) + 0.5 * std::log(stiffness[last] / stiffness[0]);
}

AwhResult awh_estimate(const AlchemicalModel& model, long steps, std::uint64_t seed) {
  const int ns = model.num_states;
  if (ns < 2) throw std::invalid_argument("alchemical model needs >= 2 lambda states");
  const int intervals = ns - 1;
  if (steps < 10L * intervals * 100L) {
    throw std::invalid_argument("awh_estimate needs at least 1000 steps per lambda interval");
  }

  Rng rng = Rng(seed).split(0xAE);
  double x = model.x_init;
  int lam = 0;

  auto energy = [&](int l, double xx) {
    double e = model.u(l, xx);
    if (!std::isfinite(e)) {
      throw NonFiniteEnergy("u(lambda=" + std::to_string(l) + ") is not finite");
    }
    return e;
  };

  // Burn-in: tune the Gaussian x-move width into the 30-50% acceptance band.
  double width = 1.0;
  int accepted = 0;
  for (int i = 1; i <= 1000; ++i) {
    double xp = x + width * rng.normal();
    double du = energy(lam, xp) - energy(lam, x);
    if (du <= 0.0 || rng.next_double() < std::exp(-du)) {
      x = xp;
      ++accepted;
    }
    if (i % 100 == 0) {
      double rate = accepted / 100.0;
      if (rate > 0.5) {
        width *= 1.4;
      } else if (rate < 0.3) {
        width *= 0.7;
      }
      accepted = 0;
    }
  }

  std::vector<double> g(static_cast<std::size_t>(ns), 0.0);
  std::vector<long> hist(static_cast<std::size_t>(ns), 0);
  double gamma = 1.0;
  long stage_steps = 0;
  const long min_stage = 100L * ns;  // a histogram of a handful of visits is not "flat"

  AwhResult res;
  for (long step = 0; step < steps; ++step) {
    ++res.steps_used;
    ++stage_steps;

    double xp = x + width * rng.normal();
    double du = energy(lam, xp) - energy(lam, x);
    if (du <= 0.0 || rng.next_double() < std::exp(-du)) x = xp;

    int prop = lam + (rng.next_bool() ? 1 : -1);
    if (prop >= 0 && prop < ns) {
      double d = (energy(prop, x) - energy(lam, x)) +
                 (g[static_cast<std::size_t>(prop)] - g[static_cast<std::size_t>(lam)]);
      if (d <= 0.0 || rng.next_double() < std::exp(-d)) lam = prop;
    }

    g[static_cast<std::size_t>(lam)] += gamma;
    ++hist[static_cast<std::size_t>(lam)];

    if (stage_steps >= min_stage) {
      long mn = *std::min_element(hist.begin(), hist.end());
      double mean = static_cast<double>(std::accumulate(hist.begin(), hist.end(), 0L)) / ns;
      if (mn > 0 && static_cast<double>(mn) >= 0.8 * mean) {
        res.stage_gammas.push_back(gamma);
        res.stage_flatness.push_back(static_cast<double>(mn) / mean);
        gamma *= 0.5;
        std::fill(hist.begin(), hist.end(), 0L);
        stage_steps = 0;
        if (gamma < 1e-4) break;  // refinement complete
      }
    }
  }

  res.bias = g;
  res.delta_f = g[0] - g[static_cast<std::size_t>(ns - 1)];
  return res;
}

FreeEnergyResult run_until_sem_detailed(
    const std::function<std::pair<double, int>(std::uint64_t)>& estimator, double target_sem,
    int max_replicas, std::uint64_t seed) {
  if (target_sem <= 0.0) throw std::invalid_argument("target_sem must be > 0");
  if (max_replicas < 2) throw std::invalid_argument("max_replicas must be >= 2");

  Rng root(seed);
  std::vector<double> values;
  FreeEnergyResult res;
  for (int i = 0; i < max_replicas; ++i) {
    auto [value, history_len] = estimator(root.split(static_cast<std::uint64_t>(i)).next_u64());
    values.push_back(value);
    res.bias_history_length = std::max(res.bias_history_length, history_len);
    int n = static_cast<int>(values.size());
    if (n < 2) continue;
    double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    double sem = std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<double>(n));
    res.estimate = mean;
    res.sem = sem;
    res.replicas = n;
    if (sem <= target_sem) {
      res.target_met = true;
      return res;
    }
  }
  res.target_met = false;
  return res;
}

FreeEnergyResult run_until_sem(const std::function<double(std::uint64_t)>& estimator,
                               double target_sem, int max_replicas, std::uint64_t seed) {
  return run_until_sem_detailed(
      [&](std::uint64_t s) { return std::pair<double, int>(estimator(s), 0); }, target_sem,
      max_replicas, seed);
}

double abfe_estimate(std::span<const double> complex_samples,
                     std::span<const double> receptor_samples,
                     std::span<const double> ligand_samples, double solv_complex,
                     double solv_receptor, double solv_ligand) {
  auto mean = [](std::span<const double> s, const char* name) {
    if (s.empty()) throw EmptySamples(std::string(name) + " sample set is empty");
    return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  };
  double gas = mean(complex_samples, "complex") - mean(receptor_samples, "receptor") -
               mean(ligand_samples, "ligand");
  double solv = solv_complex - solv_receptor - solv_ligand;
  return gas + solv;
}

}  // namespace vscreen::fep
