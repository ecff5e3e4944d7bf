#pragma once

#include <string>
#include <vector>

#include "vscreen/rng.hpp"

namespace vscreen::corpus {

// Deterministic drug-like SMILES sampler over the supported grammar subset:
// fragment units chained with optional branches. Valence is not a concern
// here; these strings exercise the parser, codec and pipeline.
inline std::string random_smiles(Rng& rng) {
  static const std::vector<std::string> inline_units = {
      "C",        "CC",       "CCC",      "CCCC",    "N",        "O",
      "S",        "P",        "B",        "CN",      "CO",       "CS",
      "C=C",      "C#N",      "C#C",      "C=N",     "c1ccccc1", "c1ccncc1",
      "c1cnccc1", "c1ccsc1",  "c1ccoc1",  "c1cncnc1", "C1CCCCC1", "C1CCNCC1",
      "C1CCOCC1", "C1CCCC1",  "C1CCC1",   "C1CC1",   "C=O",      "CCl",
      "CBr",      "CF",       "CI",       "OCC",     "NC",       "SC",
      "NCC",      "OCO",      "NCN",      "CC=O",    "CCN",      "CCO",
      "C=CC",     "CC#N",     "SCC",      "NCO",
  };
  static const std::vector<std::string> branch_units = {
      "C",   "CC",  "CCC", "O",    "N",    "S",   "=O",  "=C",  "=N",
      "#N",  "Cl",  "Br",  "F",    "I",    "OC",  "NC",  "CN",  "CO",
      "C=O", "CCl", "OCC", "C#N",  "NCC",  "CCO", "CF",  "SC",
  };
  static const char chain_atoms[] = {'C', 'C', 'C', 'N', 'O', 'S'};
  auto random_chain = [&] {
    std::string c;
    std::size_t len = 2 + rng.next_below(6);
    for (std::size_t i = 0; i < len; ++i) c += chain_atoms[rng.next_below(6)];
    return c;
  };
  std::string s = inline_units[rng.next_below(inline_units.size())];
  std::size_t n_units = 1 + rng.next_below(6);
  for (std::size_t i = 0; i < n_units; ++i) {
    double roll = rng.next_double();
    if (roll < 0.3) {
      s += "(" + branch_units[rng.next_below(branch_units.size())] + ")";
    } else if (roll < 0.45) {
      s += random_chain();
    } else {
      s += inline_units[rng.next_below(inline_units.size())];
    }
  }
  return s;
}

inline std::vector<std::string> random_corpus(std::size_t lines, std::uint64_t seed) {
  Rng root(seed);
  std::vector<std::string> out;
  out.reserve(lines);
  for (std::size_t i = 0; i < lines; ++i) {
    Rng rng = root.split(i);
    out.push_back(random_smiles(rng));
  }
  return out;
}

}  // namespace vscreen::corpus
