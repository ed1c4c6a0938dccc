// Shared helpers for tests that build molecules from literals.
#pragma once

#include <doctest.h>

#include <string>
#include <utility>
#include <vector>

#include "mtgen/chem/mol.hpp"
#include "mtgen/chem/smiles.hpp"
#include "mtgen/util/rng.hpp"

namespace testutil {

inline mtgen::chem::MolGraph must_parse(const std::string& s) {
  mtgen::chem::ParseResult r = mtgen::chem::parse_smiles(s);
  REQUIRE_MESSAGE(r.ok(), s, ": ", r.diag.message);
  return std::move(*r.mol);
}

inline std::string canon(const std::string& s) {
  return mtgen::chem::canonical_smiles(must_parse(s));
}

// Same molecule, different atom order: subgraph over a shuffled identity map.
inline mtgen::chem::MolGraph permuted(const mtgen::chem::MolGraph& m, mtgen::util::Rng& rng) {
  std::vector<uint32_t> order(m.num_atoms());
  for (uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  mtgen::chem::MolGraph p = m.subgraph(order);
  REQUIRE(!p.finalize());
  return p;
}

}  // namespace testutil
