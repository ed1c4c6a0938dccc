// Ring-system scaffold: iteratively strip terminal atoms, keep ring systems
// and the linkers between them, plus atoms multiply bonded to that frame
// (exocyclic =O and friends). Acyclic molecules have an empty scaffold.
#pragma once

#include <string>

#include "mtgen/chem/mol.hpp"

namespace mtgen::chem {

// Scaffold as a finalized graph; empty graph when the input has no rings.
MolGraph murcko_scaffold(const MolGraph& mol);

// Canonical SMILES of the scaffold; "" for acyclic molecules.
std::string murcko_scaffold_smiles(const MolGraph& mol);

}  // namespace mtgen::chem
