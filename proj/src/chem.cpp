#include "vscreen/chem.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>

#include "vscreen/rng.hpp"

namespace vscreen::chem {

namespace {

const char* kind_name(ParseErrorKind k) {
  switch (k) {
    case ParseErrorKind::UnbalancedBranch: return "UnbalancedBranch";
    case ParseErrorKind::UnclosedRingBond: return "UnclosedRingBond";
    case ParseErrorKind::UnknownToken: return "UnknownToken";
  }
  return "ParseError";
}

std::string format_error(ParseErrorKind k, std::size_t pos, const std::string& msg) {
  std::ostringstream os;
  os << kind_name(k) << " at position " << pos << ": " << msg;
  return os.str();
}

}  // namespace

ParseError::ParseError(ParseErrorKind kind, std::size_t position, const std::string& msg)
    : std::runtime_error(format_error(kind, position, msg)), kind_(kind), position_(position) {}

std::vector<int> MolecularGraph::degrees() const {
  std::vector<int> deg(atoms.size(), 0);
  for (const Bond& b : bonds) {
    ++deg[b.a];
    ++deg[b.b];
  }
  return deg;
}

bool MolecularGraph::connected() const {
  if (atoms.empty()) return true;
  std::vector<std::vector<int>> adj(atoms.size());
  for (const Bond& b : bonds) {
    adj[b.a].push_back(b.b);
    adj[b.b].push_back(b.a);
  }
  std::vector<bool> seen(atoms.size(), false);
  std::vector<int> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = true;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == atoms.size();
}

namespace {

struct RingSlot {
  int atom = -1;
  std::optional<BondOrder> bond;
  std::size_t open_pos = 0;  // 1-based position of the opening digit
};

bool is_single_atom_char(char c) {
  switch (c) {
    case 'B': case 'C': case 'N': case 'O':
    case 'P': case 'S': case 'F': case 'I':
      return true;
    default:
      return false;
  }
}

bool is_aromatic_char(char c) {
  switch (c) {
    case 'b': case 'c': case 'n': case 'o': case 'p': case 's':
      return true;
    default:
      return false;
  }
}

std::optional<BondOrder> bond_symbol(char c) {
  switch (c) {
    case '-': return BondOrder::Single;
    case '=': return BondOrder::Double;
    case '#': return BondOrder::Triple;
    default: return std::nullopt;
  }
}

}  // namespace

MolecularGraph parse_smiles(std::string_view text) {
  MolecularGraph g;
  if (text.empty()) {
    throw ParseError(ParseErrorKind::UnknownToken, 1, "empty input");
  }

  int prev_atom = -1;
  std::optional<BondOrder> pending;
  std::size_t pending_pos = 0;
  std::vector<std::pair<int, std::size_t>> branch_stack;  // (atom, '(' position)
  std::array<RingSlot, 100> rings{};

  auto add_bond = [&](int a, int b, BondOrder order, std::size_t pos) {
    if (a == b) {
      throw ParseError(ParseErrorKind::UnclosedRingBond, pos, "ring bond to the same atom");
    }
    for (const Bond& e : g.bonds) {
      if ((e.a == a && e.b == b) || (e.a == b && e.b == a)) {
        throw ParseError(ParseErrorKind::UnclosedRingBond, pos, "duplicate bond");
      }
    }
    g.bonds.push_back({a, b, order});
  };

  auto add_atom = [&](std::string element, bool aromatic, std::size_t pos) {
    g.atoms.push_back({std::move(element), aromatic});
    int idx = g.atom_count() - 1;
    if (prev_atom >= 0) {
      BondOrder order;
      if (pending) {
        order = *pending;
      } else if (aromatic && g.atoms[prev_atom].aromatic) {
        order = BondOrder::Aromatic;
      } else {
        order = BondOrder::Single;
      }
      add_bond(prev_atom, idx, order, pos);
    } else if (pending) {
      throw ParseError(ParseErrorKind::UnknownToken, pending_pos, "bond before any atom");
    }
    pending.reset();
    prev_atom = idx;
  };

  auto close_or_open_ring = [&](int number, std::size_t pos) {
    if (prev_atom < 0) {
      throw ParseError(ParseErrorKind::UnknownToken, pos, "ring closure before any atom");
    }
    RingSlot& slot = rings[static_cast<std::size_t>(number)];
    if (slot.atom < 0) {
      slot.atom = prev_atom;
      slot.bond = pending;
      slot.open_pos = pos;
      pending.reset();
      return;
    }
    if (slot.bond && pending && *slot.bond != *pending) {
      throw ParseError(ParseErrorKind::UnclosedRingBond, pos, "conflicting ring bond orders");
    }
    BondOrder order;
    if (pending) {
      order = *pending;
    } else if (slot.bond) {
      order = *slot.bond;
    } else if (g.atoms[slot.atom].aromatic && g.atoms[prev_atom].aromatic) {
      order = BondOrder::Aromatic;
    } else {
      order = BondOrder::Single;
    }
    add_bond(slot.atom, prev_atom, order, pos);
    slot = RingSlot{};
    pending.reset();
  };

  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    std::size_t pos = i + 1;  // 1-based
    if (c == 'C' && i + 1 < text.size() && text[i + 1] == 'l') {
      add_atom("Cl", false, pos);
      i += 2;
    } else if (c == 'B' && i + 1 < text.size() && text[i + 1] == 'r') {
      add_atom("Br", false, pos);
      i += 2;
    } else if (is_single_atom_char(c)) {
      add_atom(std::string(1, c), false, pos);
      ++i;
    } else if (is_aromatic_char(c)) {
      add_atom(std::string(1, static_cast<char>(c - 'a' + 'A')), true, pos);
      ++i;
    } else if (auto b = bond_symbol(c)) {
      if (pending) {
        throw ParseError(ParseErrorKind::UnknownToken, pos, "two bond symbols in a row");
      }
      if (prev_atom < 0) {
        throw ParseError(ParseErrorKind::UnknownToken, pos, "bond before any atom");
      }
      pending = b;
      pending_pos = pos;
      ++i;
    } else if (c == '(') {
      if (prev_atom < 0) {
        throw ParseError(ParseErrorKind::UnbalancedBranch, pos, "branch before any atom");
      }
      if (pending) {
        throw ParseError(ParseErrorKind::UnknownToken, pos, "bond before branch open");
      }
      branch_stack.emplace_back(prev_atom, pos);
      ++i;
    } else if (c == ')') {
      if (branch_stack.empty()) {
        throw ParseError(ParseErrorKind::UnbalancedBranch, pos, "unmatched ')'");
      }
      if (pending) {
        throw ParseError(ParseErrorKind::UnknownToken, pos, "dangling bond before ')'");
      }
      prev_atom = branch_stack.back().first;
      branch_stack.pop_back();
      ++i;
    } else if (c >= '1' && c <= '9') {
      close_or_open_ring(c - '0', pos);
      ++i;
    } else if (c == '%') {
      if (i + 2 >= text.size() ||
          !(text[i + 1] >= '0' && text[i + 1] <= '9') ||
          !(text[i + 2] >= '0' && text[i + 2] <= '9')) {
        throw ParseError(ParseErrorKind::UnknownToken, pos, "'%' needs two digits");
      }
      int number = (text[i + 1] - '0') * 10 + (text[i + 2] - '0');
      if (number < 10) {
        throw ParseError(ParseErrorKind::UnknownToken, pos, "'%' ring numbers start at 10");
      }
      close_or_open_ring(number, pos);
      i += 3;
    } else {
      throw ParseError(ParseErrorKind::UnknownToken, pos,
                       std::string("unexpected character '") + c + "'");
    }
  }

  if (pending) {
    throw ParseError(ParseErrorKind::UnknownToken, pending_pos, "dangling bond at end of input");
  }
  if (!branch_stack.empty()) {
    throw ParseError(ParseErrorKind::UnbalancedBranch, branch_stack.front().second,
                     "unclosed '('");
  }
  for (const RingSlot& slot : rings) {
    if (slot.atom >= 0) {
      throw ParseError(ParseErrorKind::UnclosedRingBond, slot.open_pos, "unclosed ring bond");
    }
  }

  g.ring_bond_flags = compute_ring_bonds(g);
  return g;
}

std::vector<bool> compute_ring_bonds(const MolecularGraph& g) {
  // Bridge finding: a bond is a ring bond iff it is not a bridge.
  const int n = g.atom_count();
  const int m = static_cast<int>(g.bonds.size());
  std::vector<bool> ring(m, false);
  if (n == 0 || m == 0) return ring;

  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, bond index)
  for (int e = 0; e < m; ++e) {
    adj[g.bonds[e].a].emplace_back(g.bonds[e].b, e);
    adj[g.bonds[e].b].emplace_back(g.bonds[e].a, e);
  }

  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  // Iterative DFS; frame = (vertex, incoming bond, next adjacency slot).
  struct Frame {
    int v;
    int in_bond;
    std::size_t next = 0;
  };
  for (int root = 0; root < n; ++root) {
    if (disc[root] != -1) continue;
    std::vector<Frame> stack;
    stack.push_back({root, -1});
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < adj[f.v].size()) {
        auto [w, e] = adj[f.v][f.next++];
        if (e == f.in_bond) continue;
        if (disc[w] == -1) {
          disc[w] = low[w] = timer++;
          stack.push_back({w, e});
        } else {
          low[f.v] = std::min(low[f.v], disc[w]);
          ring[e] = true;  // back edge always lies on a cycle
        }
      } else {
        int v = f.v;
        int e = f.in_bond;
        stack.pop_back();
        if (!stack.empty()) {
          int parent = stack.back().v;
          low[parent] = std::min(low[parent], low[v]);
          if (low[v] <= disc[parent]) ring[e] = true;  // tree edge on a cycle
        }
      }
    }
  }
  return ring;
}

int rotatable_bonds(const MolecularGraph& g) {
  std::vector<int> deg = g.degrees();
  std::vector<bool> ring =
      g.ring_bond_flags.size() == g.bonds.size() ? g.ring_bond_flags : compute_ring_bonds(g);
  int count = 0;
  for (std::size_t e = 0; e < g.bonds.size(); ++e) {
    const Bond& b = g.bonds[e];
    if (b.order != BondOrder::Single) continue;
    if (ring[e]) continue;
    if (deg[b.a] >= 2 && deg[b.b] >= 2) ++count;
  }
  return count;
}

Ligand make_ligand(std::string id, std::string smiles) {
  Ligand lig;
  lig.id = std::move(id);
  lig.smiles = std::move(smiles);
  lig.graph = parse_smiles(lig.smiles);
  lig.heavy_atoms = lig.graph.atom_count();
  lig.rotatable_bonds = rotatable_bonds(lig.graph);
  return lig;
}

namespace {

constexpr double kBondRest = 1.5;
constexpr double kRepelDist = 1.0;
constexpr double kMinSeparation = 0.5;

// Four tetrahedral directions, unit length.
const std::array<Vec3, 4> kTetra = {
    Vec3{1, 1, 1} / std::sqrt(3.0),
    Vec3{1, -1, -1} / std::sqrt(3.0),
    Vec3{-1, 1, -1} / std::sqrt(3.0),
    Vec3{-1, -1, 1} / std::sqrt(3.0),
};

void relax(const MolecularGraph& g, std::vector<Vec3>& pos, int iterations) {
  const int n = g.atom_count();
  std::vector<std::vector<bool>> bonded(n, std::vector<bool>(n, false));
  for (const Bond& b : g.bonds) {
    bonded[b.a][b.b] = bonded[b.b][b.a] = true;
  }
  const double lr = 0.05;
  std::vector<Vec3> grad(n);
  for (int it = 0; it < iterations; ++it) {
    std::fill(grad.begin(), grad.end(), Vec3{});
    for (const Bond& b : g.bonds) {
      Vec3 d = pos[b.a] - pos[b.b];
      double len = d.norm();
      if (len < 1e-12) continue;
      // d/dx of (len - rest)^2
      Vec3 dg = d * (2.0 * (len - kBondRest) / len);
      grad[b.a] += dg;
      grad[b.b] -= dg;
    }
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (bonded[a][b]) continue;
        Vec3 d = pos[a] - pos[b];
        double len = d.norm();
        if (len >= kRepelDist || len < 1e-12) continue;
        Vec3 dg = d * (-2.0 * (kRepelDist - len) / len);
        grad[a] += dg;
        grad[b] -= dg;
      }
    }
    for (int a = 0; a < n; ++a) {
      Vec3 step = grad[a] * (-lr);
      double sn = step.norm();
      if (sn > 0.2) step = step * (0.2 / sn);
      pos[a] += step;
    }
  }
}

double min_pairwise(const std::vector<Vec3>& pos) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < pos.size(); ++a)
    for (std::size_t b = a + 1; b < pos.size(); ++b)
      best = std::min(best, distance(pos[a], pos[b]));
  return best;
}

}  // namespace

Conformer embed_3d(const MolecularGraph& g, std::uint64_t seed, std::string ligand_id,
                   int iterations) {
  if (!g.connected()) throw DisconnectedGraph();
  const int n = g.atom_count();
  Conformer conf;
  conf.ligand_id = std::move(ligand_id);
  conf.coords.assign(n, Vec3{});
  if (n == 0) return conf;

  std::vector<std::vector<int>> adj(n);
  for (const Bond& b : g.bonds) {
    adj[b.a].push_back(b.b);
    adj[b.b].push_back(b.a);
  }

  Rng rng = Rng(seed).split(0x3d);
  std::vector<bool> placed(n, false);
  std::vector<int> children(n, 0);
  std::vector<int> queue{0};
  placed[0] = true;  // atom 0 pinned at the origin, no jitter
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    int v = queue[qi];
    for (int w : adj[v]) {
      if (placed[w]) continue;
      Vec3 dir = kTetra[static_cast<std::size_t>(children[v] % 4)];
      Vec3 jitter{rng.normal(), rng.normal(), rng.normal()};
      conf.coords[w] = conf.coords[v] + dir * kBondRest + jitter * 0.05;
      ++children[v];
      placed[w] = true;
      queue.push_back(w);
    }
  }

  relax(g, conf.coords, iterations);
  // Extra rounds if the layout is still too dense; bounded and deterministic.
  for (int round = 0; round < 20 && n > 1 && min_pairwise(conf.coords) < kMinSeparation;
       ++round) {
    relax(g, conf.coords, 50);
  }
  return conf;
}

std::vector<LibraryRecord> read_library_records(std::istream& in) {
  std::vector<LibraryRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    LibraryRecord rec;
    rec.line_number = line_number;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      rec.smiles = line;
      rec.id = "L" + std::to_string(line_number);
    } else {
      rec.smiles = line.substr(0, tab);
      rec.id = line.substr(tab + 1);
      if (rec.id.empty()) rec.id = "L" + std::to_string(line_number);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<LibraryRecord> read_library_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open library file: " + path);
  return read_library_records(in);
}

}  // namespace vscreen::chem
