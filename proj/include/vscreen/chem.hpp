#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vscreen/geom.hpp"

namespace vscreen::chem {

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

struct Atom {
  std::string element;  // "C", "N", "Cl", ... (aromatic atoms store the uppercase element)
  bool aromatic = false;
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
};

// Topology only: no coordinates, hydrogens implicit, "atoms" = heavy atoms.
struct MolecularGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::vector<bool> ring_bond_flags;  // per bond: lies on some cycle

  [[nodiscard]] int atom_count() const { return static_cast<int>(atoms.size()); }
  [[nodiscard]] std::vector<int> degrees() const;
  [[nodiscard]] bool connected() const;
};

enum class ParseErrorKind { UnbalancedBranch, UnclosedRingBond, UnknownToken };

// Positions are 1-based byte offsets into the input line.
class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, std::size_t position, const std::string& msg);
  [[nodiscard]] ParseErrorKind kind() const { return kind_; }
  [[nodiscard]] std::size_t position() const { return position_; }

 private:
  ParseErrorKind kind_;
  std::size_t position_;
};

class DisconnectedGraph : public std::runtime_error {
 public:
  DisconnectedGraph() : std::runtime_error("graph is not connected") {}
};

// Grammar subset: organic-subset atoms B C N O P S F Cl Br I, aromatic
// b c n o p s, bonds - = #, branches (), ring closures 1-9 and %nn.
// No bracket atoms, charges, isotopes or stereo marks.
MolecularGraph parse_smiles(std::string_view text);

// Acyclic single-order bonds whose endpoints both have degree >= 2.
int rotatable_bonds(const MolecularGraph& g);

// A bond is a ring bond iff it is not a bridge.
std::vector<bool> compute_ring_bonds(const MolecularGraph& g);

struct Ligand {
  std::string id;
  std::string smiles;
  MolecularGraph graph;
  int heavy_atoms = 0;
  int rotatable_bonds = 0;
};

Ligand make_ligand(std::string id, std::string smiles);

struct Conformer {
  std::string ligand_id;
  std::vector<Vec3> coords;  // one per atom, arbitrary length units
};

// Deterministic toy embedding: BFS placement on tetrahedral directions,
// then fixed-count spring relaxation (bonded rest length 1.5, non-bonded
// repulsion below 1.0). Same (g, seed) gives bit-identical coordinates.
Conformer embed_3d(const MolecularGraph& g, std::uint64_t seed,
                   std::string ligand_id = {}, int iterations = 200);

// Library text format: one record per line, `SMILES<TAB>ID`; the ID is
// optional (auto-assigned L<line-number>); '#'-prefixed and blank lines
// are skipped.
struct LibraryRecord {
  std::string smiles;
  std::string id;
  std::size_t line_number = 0;
};

std::vector<LibraryRecord> read_library_records(std::istream& in);
std::vector<LibraryRecord> read_library_file(const std::string& path);

}  // namespace vscreen::chem
