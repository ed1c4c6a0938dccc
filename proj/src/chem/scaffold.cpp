#include "mtgen/chem/scaffold.hpp"

#include <cstdio>

#include "mtgen/chem/smiles.hpp"

namespace mtgen::chem {

MolGraph murcko_scaffold(const MolGraph& mol) {
  size_t n = mol.num_atoms();
  std::vector<int> deg(n);
  std::vector<bool> kept(n, true);
  for (uint32_t i = 0; i < n; ++i) deg[i] = mol.degree(i);

  // strip terminals until only rings and linkers remain
  bool changed = true;
  while (changed) {
    changed = false;
    for (uint32_t i = 0; i < n; ++i) {
      if (!kept[i] || deg[i] > 1) continue;
      kept[i] = false;
      changed = true;
      for (uint32_t bi : mol.bonds_of(i)) {
        uint32_t o = mol.bonds[bi].other(i);
        if (kept[o]) --deg[o];
      }
    }
  }

  // retain atoms multiply bonded directly to the frame
  std::vector<bool> frame = kept;
  for (const Bond& b : mol.bonds) {
    if (b.kekule != BondOrder::Double && b.kekule != BondOrder::Triple) continue;
    if (frame[b.a] && !frame[b.b]) kept[b.b] = true;
    if (frame[b.b] && !frame[b.a]) kept[b.a] = true;
  }

  std::vector<uint32_t> keep_idx;
  for (uint32_t i = 0; i < n; ++i)
    if (kept[i]) keep_idx.push_back(i);
  MolGraph out = mol.subgraph(keep_idx);
  if (auto err = out.finalize()) {
    // cannot happen for a valid input: removing substituents only frees valence
    std::fprintf(stderr, "scaffold finalize failed: %s\n", err->message.c_str());
    return MolGraph{};
  }
  return out;
}

std::string murcko_scaffold_smiles(const MolGraph& mol) {
  return canonical_smiles(murcko_scaffold(mol));
}

}  // namespace mtgen::chem
