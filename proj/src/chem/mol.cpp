#include "mtgen/chem/mol.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <deque>
#include <queue>

namespace mtgen::chem {

namespace {

struct ElementInfo {
  int z;
  const char* symbol;
  double mass;
  std::array<int, 3> valences;  // 0-terminated
  bool aromatic_ok;
};

// Organic subset only; v1 grammar rejects anything else.
constexpr ElementInfo kElements[] = {
    {5, "B", 10.811, {3, 0, 0}, true},
    {6, "C", 12.011, {4, 0, 0}, true},
    {7, "N", 14.007, {3, 0, 0}, true},
    {8, "O", 15.999, {2, 0, 0}, true},
    {9, "F", 18.998, {1, 0, 0}, false},
    {15, "P", 30.974, {3, 5, 0}, true},
    {16, "S", 32.06, {2, 4, 6}, true},
    {17, "Cl", 35.453, {1, 0, 0}, false},
    {35, "Br", 79.904, {1, 0, 0}, false},
    {53, "I", 126.904, {1, 0, 0}, false},
};

const ElementInfo* element_info(int z) {
  for (const auto& e : kElements)
    if (e.z == z) return &e;
  return nullptr;
}

}  // namespace

bool element_supported(int z) { return element_info(z) != nullptr; }

int atomic_number_of(std::string_view symbol) {
  for (const auto& e : kElements)
    if (symbol == e.symbol) return e.z;
  return 0;
}

const char* symbol_of(int z) {
  const ElementInfo* e = element_info(z);
  return e ? e->symbol : "?";
}

double atomic_mass(int z) {
  if (z == 1) return 1.008;
  const ElementInfo* e = element_info(z);
  return e ? e->mass : 0.0;
}

bool element_can_be_aromatic(int z) {
  const ElementInfo* e = element_info(z);
  return e && e->aromatic_ok;
}

std::vector<int> allowed_valences(int z, int charge) {
  const ElementInfo* e = element_info(z);
  if (!e) return {};
  int shift;
  if (z == 5) shift = -charge;                 // B- gains a bond
  else if (z == 6) shift = -std::abs(charge);  // carbocation and carbanion are both trivalent
  else shift = charge;
  std::vector<int> out;
  for (int v : e->valences) {
    if (v == 0) break;
    if (v + shift >= 0) out.push_back(v + shift);
  }
  return out;
}

const Bond* MolGraph::bond_between(uint32_t a, uint32_t b) const {
  for (uint32_t bi : adj_[a]) {
    const Bond& bd = bonds[bi];
    if (bd.other(a) == b) return &bd;
  }
  return nullptr;
}

bool MolGraph::in_ring_of_size(uint32_t atom, size_t size) const {
  for (const Ring& r : sssr_)
    if (r.size() == size && std::find(r.begin(), r.end(), atom) != r.end()) return true;
  return false;
}

int MolGraph::valence_sum(uint32_t atom) const {
  int sum = 0;
  for (uint32_t bi : adj_[atom]) sum += static_cast<int>(bonds[bi].kekule);
  return sum;
}

// ---- ring perception ------------------------------------------------------

// Bridges via iterative DFS (Tarjan low-link). Non-bridge bonds are ring bonds.
static std::vector<bool> find_ring_bonds(const MolGraph& m,
                                         const std::vector<std::vector<uint32_t>>& adj) {
  size_t n = m.num_atoms();
  std::vector<bool> ring_bond(m.num_bonds(), false);
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  struct Frame { uint32_t v; uint32_t parent_bond; size_t next; };
  for (uint32_t root = 0; root < n; ++root) {
    if (disc[root] != -1) continue;
    std::vector<Frame> stack{{root, UINT32_MAX, 0}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < adj[f.v].size()) {
        uint32_t bi = adj[f.v][f.next++];
        if (bi == f.parent_bond) continue;
        uint32_t w = m.bonds[bi].other(f.v);
        if (disc[w] == -1) {
          disc[w] = low[w] = timer++;
          stack.push_back({w, bi, 0});
        } else {
          low[f.v] = std::min(low[f.v], disc[w]);
          ring_bond[bi] = true;  // back edge is always in a cycle
        }
      } else {
        uint32_t v = f.v;
        uint32_t pb = f.parent_bond;
        stack.pop_back();
        if (!stack.empty()) {
          uint32_t p = stack.back().v;
          low[p] = std::min(low[p], low[v]);
          if (low[v] > disc[p]) {
            // bridge: stays false
          } else if (pb != UINT32_MAX) {
            ring_bond[pb] = true;
          }
        }
      }
    }
  }
  return ring_bond;
}

// Smallest cycle through `bond`, as bond-index set, via BFS avoiding the bond.
static std::vector<uint32_t> smallest_cycle_through(const MolGraph& m,
                                                    const std::vector<std::vector<uint32_t>>& adj,
                                                    uint32_t bond) {
  uint32_t src = m.bonds[bond].a, dst = m.bonds[bond].b;
  std::vector<int32_t> prev_bond(m.num_atoms(), -1);
  std::vector<bool> seen(m.num_atoms(), false);
  std::queue<uint32_t> q;
  q.push(src);
  seen[src] = true;
  while (!q.empty()) {
    uint32_t v = q.front();
    q.pop();
    if (v == dst) break;
    for (uint32_t bi : adj[v]) {
      if (bi == bond) continue;
      uint32_t w = m.bonds[bi].other(v);
      if (seen[w]) continue;
      seen[w] = true;
      prev_bond[w] = static_cast<int32_t>(bi);
      q.push(w);
    }
  }
  if (!seen[dst]) return {};
  std::vector<uint32_t> cycle{bond};
  uint32_t v = dst;
  while (v != src) {
    uint32_t bi = static_cast<uint32_t>(prev_bond[v]);
    cycle.push_back(bi);
    v = m.bonds[bi].other(v);
  }
  return cycle;
}

std::optional<ChemError> MolGraph::perceive_rings() {
  size_t n = num_atoms(), mbonds = num_bonds();
  // components
  n_components_ = 0;
  std::vector<int> comp(n, -1);
  for (uint32_t i = 0; i < n; ++i) {
    if (comp[i] != -1) continue;
    std::queue<uint32_t> q;
    q.push(i);
    comp[i] = n_components_;
    while (!q.empty()) {
      uint32_t v = q.front();
      q.pop();
      for (uint32_t bi : adj_[v]) {
        uint32_t w = bonds[bi].other(v);
        if (comp[w] == -1) {
          comp[w] = n_components_;
          q.push(w);
        }
      }
    }
    ++n_components_;
  }

  std::vector<bool> ring_bond = find_ring_bonds(*this, adj_);
  for (uint32_t bi = 0; bi < mbonds; ++bi) bonds[bi].in_ring = ring_bond[bi];

  // SSSR: smallest cycle through every ring bond, then greedy GF(2)-independent
  // selection by size up to the cyclomatic number.
  size_t cyclomatic = mbonds - n + static_cast<size_t>(n_components_);
  sssr_.clear();
  atom_ring_count_.assign(n, 0);
  if (cyclomatic > 0) {
    std::vector<std::vector<uint32_t>> candidates;
    for (uint32_t bi = 0; bi < mbonds; ++bi) {
      if (!ring_bond[bi]) continue;
      auto cyc = smallest_cycle_through(*this, adj_, bi);
      if (!cyc.empty()) candidates.push_back(std::move(cyc));
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto& a, const auto& b) { return a.size() < b.size(); });
    // GF(2) elimination over bond-membership bitsets
    size_t words = (mbonds + 63) / 64;
    std::vector<std::vector<uint64_t>> basis;
    std::vector<std::vector<uint32_t>> chosen;
    for (const auto& cyc : candidates) {
      if (chosen.size() == cyclomatic) break;
      std::vector<uint64_t> vec(words, 0);
      for (uint32_t bi : cyc) vec[bi / 64] |= (1ULL << (bi % 64));
      std::vector<uint64_t> red = vec;
      for (const auto& b : basis) {
        // reduce by basis vector's leading bit
        size_t lead = 0;
        for (size_t w = words; w-- > 0;) {
          if (b[w]) {
            lead = w * 64 + (63 - static_cast<size_t>(__builtin_clzll(b[w])));
            break;
          }
        }
        if (red[lead / 64] & (1ULL << (lead % 64)))
          for (size_t w = 0; w < words; ++w) red[w] ^= b[w];
      }
      bool zero = true;
      for (uint64_t w : red) zero = zero && (w == 0);
      if (zero) continue;
      basis.push_back(red);
      chosen.push_back(cyc);
    }
    // convert bond cycles to ordered atom rings
    for (const auto& cyc : chosen) {
      Ring ring;
      uint32_t start = bonds[cyc[0]].a;
      uint32_t v = start;
      std::vector<bool> used(cyc.size(), false);
      do {
        ring.push_back(v);
        bool advanced = false;
        for (size_t k = 0; k < cyc.size(); ++k) {
          if (used[k]) continue;
          const Bond& bd = bonds[cyc[k]];
          if (bd.a == v || bd.b == v) {
            used[k] = true;
            v = bd.other(v);
            advanced = true;
            break;
          }
        }
        if (!advanced) break;
      } while (v != start);
      if (ring.size() >= 3) sssr_.push_back(std::move(ring));
    }
    for (const Ring& r : sssr_)
      for (uint32_t a : r) atom_ring_count_[a]++;
  }
  return std::nullopt;
}

// ---- kekulization ----------------------------------------------------------

// Classify a written-aromatic atom: does it still need a pi bond in the
// Kekule structure, or is it complete (lone pair donor, empty orbital, or an
// atom whose double bond is already explicit, e.g. the pyridone carbonyl)?
// sigma counts connections + hydrogens; existing_pi counts explicit
// double/triple bond order beyond sigma. Needs iff sigma+existing == V-1,
// complete iff == V, with V the charge-adjusted default valence.
enum class PiRole { NeedsDouble, Complete, Invalid };

static PiRole pi_role(const MolGraph& m, uint32_t ai, int h_count) {
  const Atom& a = m.atoms[ai];
  auto vals = allowed_valences(a.atomic_number, a.formal_charge);
  if (vals.empty()) return PiRole::Invalid;
  int sigma = m.degree(ai) + h_count;
  int existing_pi = 0;
  for (uint32_t bi : m.bonds_of(ai)) {
    BondOrder o = m.bonds[bi].order;
    if (o == BondOrder::Double) existing_pi += 1;
    else if (o == BondOrder::Triple) existing_pi += 2;
  }
  int v = vals.front();
  if (sigma + existing_pi == v - 1) return PiRole::NeedsDouble;
  if (sigma + existing_pi == v) return PiRole::Complete;
  return PiRole::Invalid;
}

// Hydrogen count used for aromatic atoms before implicit assignment: bracket
// atoms have a fixed count; bare aromatic atoms get max(0, V-1-degree), the
// Daylight reading (pyrrole nitrogen must be written [nH]).
static int aromatic_h_guess(const MolGraph& m, uint32_t ai) {
  const Atom& a = m.atoms[ai];
  if (a.bracket) return a.explicit_h;
  auto vals = allowed_valences(a.atomic_number, a.formal_charge);
  int v = vals.empty() ? 0 : vals.front();
  return std::max(0, v - 1 - m.degree(ai));
}

std::optional<ChemError> MolGraph::kekulize_written_aromatics() {
  size_t n = num_atoms();
  std::vector<bool> needs(n, false);
  std::vector<bool> arom_written(n, false);
  for (uint32_t i = 0; i < n; ++i) arom_written[i] = atoms[i].aromatic;

  for (uint32_t i = 0; i < n; ++i) {
    if (!arom_written[i]) continue;
    if (!element_can_be_aromatic(atoms[i].atomic_number))
      return ChemError{std::string(symbol_of(atoms[i].atomic_number)) + " cannot be aromatic",
                       static_cast<int32_t>(i)};
    if (!in_ring(i))
      return ChemError{"aromatic atom outside any ring", static_cast<int32_t>(i)};
    PiRole role = pi_role(*this, i, aromatic_h_guess(*this, i));
    if (role == PiRole::Invalid)
      return ChemError{"aromatic atom with impossible valence", static_cast<int32_t>(i)};
    needs[i] = (role == PiRole::NeedsDouble);
  }

  // Default all aromatic-written bonds to single, then match `needs` atoms
  // pairwise along aromatic ring bonds.
  std::vector<uint32_t> arom_bonds;
  for (uint32_t bi = 0; bi < num_bonds(); ++bi) {
    Bond& b = bonds[bi];
    if (b.order == BondOrder::Aromatic) {
      if (!b.in_ring) {
        if (b.aromatic_written)
          return ChemError{"aromatic bond outside a ring", static_cast<int32_t>(b.a)};
        // unspecified bond between two aromatic atoms outside a ring is single
        b.order = BondOrder::Single;
        b.kekule = BondOrder::Single;
        continue;
      }
      b.kekule = BondOrder::Single;
      arom_bonds.push_back(bi);
    } else {
      b.kekule = b.order;
    }
  }

  // Backtracking perfect matching over atoms flagged `needs`.
  std::vector<int> match(n, -1);  // atom -> atom matched via double bond
  std::vector<uint32_t> todo;
  for (uint32_t i = 0; i < n; ++i)
    if (needs[i]) todo.push_back(i);

  std::vector<std::vector<uint32_t>> cand(n);
  for (uint32_t bi : arom_bonds) {
    const Bond& b = bonds[bi];
    if (needs[b.a] && needs[b.b]) {
      cand[b.a].push_back(b.b);
      cand[b.b].push_back(b.a);
    }
  }

  // deterministic order: most constrained first
  std::stable_sort(todo.begin(), todo.end(),
                   [&](uint32_t x, uint32_t y) { return cand[x].size() < cand[y].size(); });

  struct Kek {
    const std::vector<std::vector<uint32_t>>& cand;
    std::vector<int>& match;
    bool run(const std::vector<uint32_t>& order, size_t idx) {
      if (idx == order.size()) return true;
      uint32_t v = order[idx];
      if (match[v] != -1) return run(order, idx + 1);
      for (uint32_t w : cand[v]) {
        if (match[w] != -1) continue;
        match[v] = static_cast<int>(w);
        match[w] = static_cast<int>(v);
        if (run(order, idx + 1)) return true;
        match[v] = match[w] = -1;
      }
      return false;
    }
  };
  Kek kek{cand, match};
  if (!kek.run(todo, 0))
    return ChemError{"aromatic system cannot be kekulized",
                     todo.empty() ? -1 : static_cast<int32_t>(todo.front())};

  for (uint32_t bi : arom_bonds) {
    Bond& b = bonds[bi];
    if (match[b.a] == static_cast<int>(b.b)) b.kekule = BondOrder::Double;
  }
  // bonds stay flagged Aromatic in `order` only if perception confirms below;
  // reset to kekule for now, perception re-marks.
  for (uint32_t bi : arom_bonds) bonds[bi].order = bonds[bi].kekule;
  return std::nullopt;
}

// ---- aromaticity perception -------------------------------------------------

namespace {

// Pi-electron contribution of `ai` to a candidate aromatic system, or -1 when
// the atom cannot sit in an aromatic ring (sp3 or exotic). `system` marks the
// atoms of the candidate; an in-system double bond contributes 1 per end, an
// exocyclic double bond 0, a lone pair 2, an empty orbital 0.
int pi_contribution(const MolGraph& m, uint32_t ai, const std::vector<bool>& in_system) {
  const Atom& a = m.atoms[ai];
  bool has_double_in = false, has_double_ring = false, has_double_acyclic = false;
  bool has_triple = false;
  for (uint32_t bi : m.bonds_of(ai)) {
    const Bond& b = m.bonds[bi];
    if (b.kekule == BondOrder::Double) {
      uint32_t o = b.other(ai);
      if (in_system[o]) has_double_in = true;
      else if (m.in_ring(o)) has_double_ring = true;  // fused ring: conjugation continues
      else has_double_acyclic = true;
    } else if (b.kekule == BondOrder::Triple) {
      has_triple = true;
    }
  }
  if (has_triple) return -1;
  if (has_double_in || has_double_ring) return 1;
  if (has_double_acyclic) {
    // carbonyl-type member (quinones): sp2, contributes no pi electron.
    return 0;
  }
  // No double bond: lone pair or empty orbital decides.
  auto vals = allowed_valences(a.atomic_number, a.formal_charge);
  if (vals.empty()) return -1;
  int sigma = m.degree(ai) + a.total_h();
  int v = vals.front();
  if (sigma == v) {
    // filled orbital in the plane of the pi system
    switch (a.atomic_number) {
      case 7: case 8: case 15: case 16: return 2;            // N, O, P, S lone pair
      case 6: return a.formal_charge < 0 ? 2 : -1;           // carbanion
      case 5: return 0;                                      // empty p on boron
      default: return -1;
    }
  }
  if (sigma == v - 1 && a.atomic_number == 6 && a.formal_charge > 0) return 0;  // tropylium
  return -1;
}

bool huckel(int pi) { return pi >= 2 && (pi - 2) % 4 == 0; }

}  // namespace

void MolGraph::perceive_aromaticity() {
  size_t n = num_atoms();
  for (auto& a : atoms) a.aromatic = false;

  std::vector<bool> atom_aromatic(n, false);
  // Pass 1: individual SSSR rings.
  std::vector<const Ring*> failed;
  for (const Ring& ring : sssr_) {
    std::vector<bool> in_sys(n, false);
    for (uint32_t a : ring) in_sys[a] = true;
    int pi = 0;
    bool ok = true;
    for (uint32_t a : ring) {
      int c = pi_contribution(*this, a, in_sys);
      if (c < 0) { ok = false; break; }
      pi += c;
    }
    if (ok && huckel(pi)) {
      for (uint32_t a : ring) atom_aromatic[a] = true;
    } else if (ok) {
      failed.push_back(&ring);
    }
  }
  // Pass 2: unions of fused rings that individually failed (azulene-type).
  if (failed.size() >= 2) {
    // group failed rings sharing atoms
    std::vector<int> group(failed.size(), -1);
    int ng = 0;
    for (size_t i = 0; i < failed.size(); ++i) {
      if (group[i] != -1) continue;
      group[i] = ng;
      std::deque<size_t> q{i};
      while (!q.empty()) {
        size_t cur = q.front();
        q.pop_front();
        for (size_t j = 0; j < failed.size(); ++j) {
          if (group[j] != -1) continue;
          bool shares = false;
          for (uint32_t a : *failed[cur])
            if (std::find(failed[j]->begin(), failed[j]->end(), a) != failed[j]->end()) {
              shares = true;
              break;
            }
          if (shares) {
            group[j] = ng;
            q.push_back(j);
          }
        }
      }
      ++ng;
    }
    for (int g = 0; g < ng; ++g) {
      std::vector<bool> in_sys(n, false);
      std::vector<uint32_t> members;
      for (size_t i = 0; i < failed.size(); ++i)
        if (group[i] == g)
          for (uint32_t a : *failed[i])
            if (!in_sys[a]) {
              in_sys[a] = true;
              members.push_back(a);
            }
      if (members.size() < 3) continue;
      int pi = 0;
      bool ok = true;
      for (uint32_t a : members) {
        int c = pi_contribution(*this, a, in_sys);
        if (c < 0) { ok = false; break; }
        pi += c;
      }
      if (ok && huckel(pi))
        for (uint32_t a : members) atom_aromatic[a] = true;
    }
  }

  for (uint32_t i = 0; i < n; ++i) atoms[i].aromatic = atom_aromatic[i];

  // A ring bond is aromatic iff it lies in an SSSR ring whose atoms are all
  // aromatic.
  for (const Ring& ring : sssr_) {
    bool all = true;
    for (uint32_t a : ring) all = all && atom_aromatic[a];
    if (!all) continue;
    for (size_t k = 0; k < ring.size(); ++k) {
      uint32_t u = ring[k], v = ring[(k + 1) % ring.size()];
      for (uint32_t bi : adj_[u]) {
        Bond& b = bonds[bi];
        if (b.other(u) == v && (b.kekule == BondOrder::Single || b.kekule == BondOrder::Double))
          b.order = BondOrder::Aromatic;
      }
    }
  }
}

// ---- hydrogens and valence ---------------------------------------------------

std::optional<ChemError> MolGraph::assign_hydrogens(bool assign_implicit) {
  for (uint32_t i = 0; i < num_atoms(); ++i) {
    Atom& a = atoms[i];
    int bond_sum = valence_sum(i);
    if (assign_implicit) {
      if (a.bracket) {
        a.implicit_h = 0;
      } else {
        // bare organic-subset atom, charge is always 0 here
        auto vals = allowed_valences(a.atomic_number, 0);
        int h = -1;
        for (int v : vals)
          if (v >= bond_sum) { h = v - bond_sum; break; }
        if (h < 0)
          return ChemError{std::string(symbol_of(a.atomic_number)) + " exceeds allowed valence",
                           static_cast<int32_t>(i)};
        a.implicit_h = static_cast<uint8_t>(h);
      }
    }
    auto vals = allowed_valences(a.atomic_number, a.formal_charge);
    if (vals.empty()) return ChemError{"unsupported charge state", static_cast<int32_t>(i)};
    int total = bond_sum + a.total_h();
    int vmax = *std::max_element(vals.begin(), vals.end());
    if (total > vmax)
      return ChemError{std::string(symbol_of(a.atomic_number)) + " exceeds allowed valence",
                       static_cast<int32_t>(i)};
  }
  return std::nullopt;
}

std::optional<ChemError> MolGraph::finalize(bool assign_implicit_h) {
  adj_.assign(num_atoms(), {});
  for (uint32_t bi = 0; bi < num_bonds(); ++bi) {
    adj_[bonds[bi].a].push_back(bi);
    adj_[bonds[bi].b].push_back(bi);
  }
  if (auto err = perceive_rings()) return err;
  if (auto err = kekulize_written_aromatics()) return err;
  if (auto err = assign_hydrogens(assign_implicit_h)) return err;

  std::vector<bool> written_aromatic(num_atoms());
  for (uint32_t i = 0; i < num_atoms(); ++i) written_aromatic[i] = atoms[i].aromatic;
  perceive_aromaticity();
  for (uint32_t i = 0; i < num_atoms(); ++i)
    if (written_aromatic[i] && !atoms[i].aromatic)
      return ChemError{"written aromatic ring fails the aromaticity model",
                       static_cast<int32_t>(i)};
  return std::nullopt;
}

MolGraph MolGraph::subgraph(const std::vector<uint32_t>& keep_atoms) const {
  MolGraph out;
  std::vector<int32_t> remap(num_atoms(), -1);
  for (uint32_t ai : keep_atoms) {
    remap[ai] = static_cast<int32_t>(out.atoms.size());
    Atom a = atoms[ai];
    a.aromatic = false;  // re-perceived by finalize()
    out.atoms.push_back(a);
  }
  for (const Bond& b : bonds) {
    if (remap[b.a] < 0 || remap[b.b] < 0) continue;
    Bond nb;
    nb.a = static_cast<uint32_t>(remap[b.a]);
    nb.b = static_cast<uint32_t>(remap[b.b]);
    nb.order = b.kekule;  // kekule view; aromaticity re-perceived
    nb.kekule = b.kekule;
    out.bonds.push_back(nb);
  }
  return out;
}

}  // namespace mtgen::chem
