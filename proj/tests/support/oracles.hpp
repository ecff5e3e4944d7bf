#pragma once

// Test-side oracles, independent of the implementation paths they check.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vscreen/chem.hpp"
#include "vscreen/dock.hpp"
#include "vscreen/rng.hpp"

namespace oracles {

// --- SMILES token counting -------------------------------------------------
// Counts atom tokens and ring-closure pairs by pure text scanning, never
// building a graph. For the dot-free connected grammar subset,
// bonds = atoms - 1 + ring_closure_pairs.
struct TokenCounts {
  int atoms = 0;
  int ring_pairs = 0;
  bool ok = false;
};

inline TokenCounts count_smiles_tokens(std::string_view text) {
  TokenCounts tc;
  std::map<int, int> open;
  std::size_t i = 0;
  auto is_atom1 = [](char c) {
    return c == 'B' || c == 'C' || c == 'N' || c == 'O' || c == 'P' || c == 'S' || c == 'F' ||
           c == 'I';
  };
  auto is_arom = [](char c) {
    return c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's';
  };
  while (i < text.size()) {
    char c = text[i];
    if ((c == 'C' && i + 1 < text.size() && text[i + 1] == 'l') ||
        (c == 'B' && i + 1 < text.size() && text[i + 1] == 'r')) {
      ++tc.atoms;
      i += 2;
    } else if (is_atom1(c) || is_arom(c)) {
      ++tc.atoms;
      ++i;
    } else if (c == '-' || c == '=' || c == '#' || c == '(' || c == ')') {
      ++i;
    } else if (c >= '1' && c <= '9') {
      int n = c - '0';
      if (++open[n] == 2) {
        ++tc.ring_pairs;
        open[n] = 0;
      }
      ++i;
    } else if (c == '%' && i + 2 < text.size() && std::isdigit(text[i + 1]) &&
               std::isdigit(text[i + 2])) {
      int n = (text[i + 1] - '0') * 10 + (text[i + 2] - '0');
      if (++open[n] == 2) {
        ++tc.ring_pairs;
        open[n] = 0;
      }
      i += 3;
    } else {
      return tc;  // outside vocabulary; ok stays false
    }
  }
  for (const auto& [n, count] : open) {
    if (count != 0) return tc;  // unclosed ring
  }
  tc.ok = true;
  return tc;
}

// --- brute-force maximum common connected subgraph ---------------------------
struct BruteMcs {
  int bonds = 0;
  int atoms = 0;
  std::vector<std::pair<int, int>> mapping;
};

namespace detail {

inline bool mapped_subgraph_connected(const std::vector<int>& subset,
                                      const std::vector<std::pair<int, int>>& common_bonds) {
  if (subset.size() <= 1) return true;
  std::map<int, std::vector<int>> adj;
  for (auto [a, b] : common_bonds) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> stack{subset[0]};
  std::map<int, bool> seen;
  seen[subset[0]] = true;
  std::size_t reached = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = true;
        ++reached;
        stack.push_back(w);
      }
    }
  }
  return reached == subset.size();
}

inline void try_mapping(const vscreen::chem::MolecularGraph& A,
                        const vscreen::chem::MolecularGraph& B, const std::vector<int>& subset,
                        std::vector<int>& image, std::vector<bool>& used, std::size_t depth,
                        BruteMcs& best) {
  if (depth == subset.size()) {
    std::vector<std::pair<int, int>> common;
    for (const vscreen::chem::Bond& e : A.bonds) {
      auto ia = std::find(subset.begin(), subset.end(), e.a);
      auto ib = std::find(subset.begin(), subset.end(), e.b);
      if (ia == subset.end() || ib == subset.end()) continue;
      int fa = image[static_cast<std::size_t>(ia - subset.begin())];
      int fb = image[static_cast<std::size_t>(ib - subset.begin())];
      bool in_b = false;
      for (const vscreen::chem::Bond& eb : B.bonds) {
        if ((eb.a == fa && eb.b == fb) || (eb.a == fb && eb.b == fa)) in_b = true;
      }
      if (in_b) common.emplace_back(e.a, e.b);
    }
    if (!mapped_subgraph_connected(subset, common)) return;
    int bonds = static_cast<int>(common.size());
    int atoms = static_cast<int>(subset.size());
    if (atoms > 1 && bonds == 0) return;  // isolated atoms are not connected
    std::vector<std::pair<int, int>> mapping;
    for (std::size_t k = 0; k < subset.size(); ++k) mapping.emplace_back(subset[k], image[k]);
    std::sort(mapping.begin(), mapping.end());
    if (bonds > best.bonds || (bonds == best.bonds && atoms > best.atoms) ||
        (bonds == best.bonds && atoms == best.atoms &&
         (best.mapping.empty() || mapping < best.mapping))) {
      best = {bonds, atoms, std::move(mapping)};
    }
    return;
  }
  int a = subset[depth];
  for (int b = 0; b < B.atom_count(); ++b) {
    if (used[static_cast<std::size_t>(b)]) continue;
    if (A.atoms[static_cast<std::size_t>(a)].element !=
        B.atoms[static_cast<std::size_t>(b)].element) {
      continue;
    }
    used[static_cast<std::size_t>(b)] = true;
    image[depth] = b;
    try_mapping(A, B, subset, image, used, depth + 1, best);
    used[static_cast<std::size_t>(b)] = false;
  }
}

}  // namespace detail

inline BruteMcs brute_mcs(const vscreen::chem::MolecularGraph& A,
                          const vscreen::chem::MolecularGraph& B) {
  BruteMcs best;
  int n = A.atom_count();
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> subset;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) subset.push_back(i);
    }
    std::vector<int> image(subset.size(), -1);
    std::vector<bool> used(static_cast<std::size_t>(B.atom_count()), false);
    detail::try_mapping(A, B, subset, image, used, 0, best);
  }
  return best;
}

// --- random labelled connected graphs ---------------------------------------
inline vscreen::chem::MolecularGraph random_graph(vscreen::Rng& rng, int max_atoms) {
  static const char* elements[] = {"C", "C", "N", "O"};
  vscreen::chem::MolecularGraph g;
  int n = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_atoms)));
  for (int i = 0; i < n; ++i) {
    g.atoms.push_back({elements[rng.next_below(4)], false});
  }
  for (int i = 1; i < n; ++i) {  // random spanning tree
    int p = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i)));
    g.bonds.push_back({p, i, vscreen::chem::BondOrder::Single});
  }
  int extra = static_cast<int>(rng.next_below(3));
  for (int e = 0; e < extra && n >= 3; ++e) {
    int a = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
    int b = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
    if (a == b) continue;
    bool dup = false;
    for (const auto& bond : g.bonds) {
      if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a)) dup = true;
    }
    if (!dup) g.bonds.push_back({std::min(a, b), std::max(a, b), vscreen::chem::BondOrder::Single});
  }
  g.ring_bond_flags = vscreen::chem::compute_ring_bonds(g);
  return g;
}

// --- dense grid search over single-atom translations -------------------------
// Returns the best grid point of the geometric score for a one-atom ligand.
inline std::pair<vscreen::Vec3, double> grid_search_single_atom(
    const vscreen::dock::Pocket& pocket, double step) {
  vscreen::chem::Conformer conf;
  conf.coords = {{0, 0, 0}};
  vscreen::dock::TorsionTopology topo;
  vscreen::Vec3 best{};
  double best_score = -1e300;
  for (double x = pocket.bounds.lo.x; x <= pocket.bounds.hi.x; x += step) {
    for (double y = pocket.bounds.lo.y; y <= pocket.bounds.hi.y; y += step) {
      for (double z = pocket.bounds.lo.z; z <= pocket.bounds.hi.z; z += step) {
        vscreen::dock::Pose pose;
        pose.translation = {x, y, z};
        double s = vscreen::dock::geometric_score(conf, topo, pose, pocket);
        if (s > best_score) {
          best_score = s;
          best = {x, y, z};
        }
      }
    }
  }
  return {best, best_score};
}

// --- exhaustive makespan for independent tasks on identical 1-core workers ---
inline double optimal_makespan(const std::vector<double>& durations, int workers) {
  std::vector<double> load(static_cast<std::size_t>(workers), 0.0);
  double best = 1e300;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == durations.size()) {
      best = std::min(best, *std::max_element(load.begin(), load.end()));
      return;
    }
    double current_max = *std::max_element(load.begin(), load.end());
    if (current_max >= best) return;
    for (int w = 0; w < workers; ++w) {
      load[static_cast<std::size_t>(w)] += durations[i];
      rec(i + 1);
      load[static_cast<std::size_t>(w)] -= durations[i];
    }
  };
  rec(0);
  return best;
}

}  // namespace oracles
