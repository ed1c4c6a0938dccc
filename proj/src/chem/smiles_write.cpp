#include <algorithm>
#include <array>
#include <cstring>

#include "mtgen/chem/smiles.hpp"

namespace mtgen::chem {

namespace {

// Iterative neighborhood refinement. Seeds ranks from local invariants, then
// splits classes by multisets of neighbor ranks until the partition is stable.
// Remaining ties (symmetric atoms) are broken one atom at a time; for
// automorphic atoms the choice cannot change the canonical string.
std::vector<uint32_t> refine_to_stable(const MolGraph& m, std::vector<uint32_t> rank) {
  size_t n = m.num_atoms();
  auto distinct = [&](const std::vector<uint32_t>& r) {
    std::vector<uint32_t> c(r);
    std::sort(c.begin(), c.end());
    return std::unique(c.begin(), c.end()) - c.begin();
  };
  long prev_distinct = distinct(rank);
  while (true) {
    std::vector<std::pair<std::vector<uint32_t>, uint32_t>> keys(n);
    for (uint32_t i = 0; i < n; ++i) {
      std::vector<uint32_t> k;
      k.push_back(rank[i]);
      std::vector<uint32_t> nb;
      for (uint32_t bi : m.bonds_of(i)) {
        const Bond& b = m.bonds[bi];
        // fold the bond order in so that e.g. C=C and C-C neighbors differ
        nb.push_back(rank[b.other(i)] * 8 + static_cast<uint32_t>(b.order));
      }
      std::sort(nb.begin(), nb.end());
      k.insert(k.end(), nb.begin(), nb.end());
      keys[i] = {std::move(k), i};
    }
    std::vector<std::pair<std::vector<uint32_t>, uint32_t>> sorted = keys;
    std::sort(sorted.begin(), sorted.end());
    std::vector<uint32_t> next(n);
    uint32_t r = 0;
    for (size_t k = 0; k < n; ++k) {
      if (k > 0 && sorted[k].first != sorted[k - 1].first) ++r;
      next[sorted[k].second] = r;
    }
    long d = distinct(next);
    rank = std::move(next);
    if (d == prev_distinct) break;
    prev_distinct = d;
  }
  return rank;
}

}  // namespace

std::vector<uint32_t> canonical_ranks(const MolGraph& m) {
  size_t n = m.num_atoms();
  if (n == 0) return {};

  // initial invariant: element, charge, degree, hydrogens, ring flag, aromatic
  std::vector<std::pair<std::array<uint32_t, 6>, uint32_t>> inv(n);
  for (uint32_t i = 0; i < n; ++i) {
    const Atom& a = m.atoms[i];
    inv[i] = {{a.atomic_number, static_cast<uint32_t>(a.formal_charge + 16),
               static_cast<uint32_t>(m.degree(i)), static_cast<uint32_t>(a.total_h()),
               m.in_ring(i) ? 1u : 0u, a.aromatic ? 1u : 0u},
              i};
  }
  auto sorted = inv;
  std::sort(sorted.begin(), sorted.end());
  std::vector<uint32_t> rank(n);
  uint32_t r = 0;
  for (size_t k = 0; k < n; ++k) {
    if (k > 0 && sorted[k].first != sorted[k - 1].first) ++r;
    rank[sorted[k].second] = r;
  }

  rank = refine_to_stable(m, std::move(rank));

  // tie-breaking: promote one member of the lowest tied class, re-refine
  while (true) {
    std::vector<uint32_t> count(n, 0);
    for (uint32_t v : rank) count[v]++;
    int32_t tied = -1;
    for (uint32_t v = 0; v < n; ++v)
      if (count[v] >= 2) {
        tied = static_cast<int32_t>(v);
        break;
      }
    if (tied < 0) break;
    uint32_t chosen = UINT32_MAX;
    for (uint32_t i = 0; i < n; ++i)
      if (rank[i] == static_cast<uint32_t>(tied)) {
        chosen = i;
        break;
      }
    for (uint32_t i = 0; i < n; ++i) rank[i] = rank[i] * 2 + 1;
    rank[chosen] -= 1;
    rank = refine_to_stable(m, std::move(rank));
  }

  // compress to 0..n-1
  std::vector<std::pair<uint32_t, uint32_t>> order(n);
  for (uint32_t i = 0; i < n; ++i) order[i] = {rank[i], i};
  std::sort(order.begin(), order.end());
  for (uint32_t k = 0; k < n; ++k) rank[order[k].second] = k;
  return rank;
}

namespace {

bool writable_bare(const MolGraph& m, uint32_t i) {
  const Atom& a = m.atoms[i];
  if (a.formal_charge != 0) return false;
  auto vals = allowed_valences(a.atomic_number, 0);
  if (vals.empty()) return false;
  int expected;
  if (a.aromatic) {
    expected = std::max(0, vals.front() - 1 - m.degree(i));
  } else {
    int ksum = m.valence_sum(i);
    expected = -1;
    for (int v : vals)
      if (v >= ksum) {
        expected = v - ksum;
        break;
      }
    if (expected < 0) return false;
  }
  return expected == a.total_h();
}

void append_atom(std::string& out, const MolGraph& m, uint32_t i) {
  const Atom& a = m.atoms[i];
  std::string sym = symbol_of(a.atomic_number);
  if (a.aromatic)
    for (char& c : sym) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (writable_bare(m, i)) {
    out += sym;
    return;
  }
  out += '[';
  out += sym;
  int h = a.total_h();
  if (h > 0) {
    out += 'H';
    if (h > 1) out += std::to_string(h);
  }
  if (a.formal_charge != 0) {
    out += (a.formal_charge > 0) ? '+' : '-';
    int mag = std::abs(a.formal_charge);
    if (mag > 1) out += std::to_string(mag);
  }
  out += ']';
}

// Bond symbol on the path: nothing for single/aromatic except '-' between two
// aromatic atoms, where omission would read as an aromatic bond.
void append_bond(std::string& out, const MolGraph& m, uint32_t bi) {
  const Bond& b = m.bonds[bi];
  switch (b.order) {
    case BondOrder::Single:
      if (m.atoms[b.a].aromatic && m.atoms[b.b].aromatic) out += '-';
      break;
    case BondOrder::Double: out += '='; break;
    case BondOrder::Triple: out += '#'; break;
    case BondOrder::Aromatic: break;
  }
}

struct Writer {
  const MolGraph& m;
  const std::vector<uint32_t>& rank;
  std::vector<bool> visited;
  std::vector<int8_t> bond_seen;  // 0 new, 1 tree, 2 ring closure
  std::vector<std::vector<uint32_t>> opens_at;   // atom -> ring bonds opening here
  std::vector<std::vector<uint32_t>> closes_at;  // atom -> ring bonds closing here
  std::vector<int> bond_digit;
  std::vector<bool> digit_used;

  explicit Writer(const MolGraph& mol, const std::vector<uint32_t>& ranks)
      : m(mol),
        rank(ranks),
        visited(mol.num_atoms(), false),
        bond_seen(mol.num_bonds(), 0),
        opens_at(mol.num_atoms()),
        closes_at(mol.num_atoms()),
        bond_digit(mol.num_bonds(), -1),
        digit_used(100, false) {}

  std::vector<uint32_t> ordered_bonds(uint32_t u) const {
    std::vector<uint32_t> bs(m.bonds_of(u).begin(), m.bonds_of(u).end());
    std::sort(bs.begin(), bs.end(), [&](uint32_t x, uint32_t y) {
      return rank[m.bonds[x].other(u)] < rank[m.bonds[y].other(u)];
    });
    return bs;
  }

  // pass 1: classify edges and collect ring-closure lists in emission order
  void survey(uint32_t u) {
    visited[u] = true;
    for (uint32_t bi : ordered_bonds(u)) {
      if (bond_seen[bi]) continue;
      uint32_t v = m.bonds[bi].other(u);
      if (visited[v]) {
        bond_seen[bi] = 2;
        opens_at[v].push_back(bi);  // v was emitted first
        closes_at[u].push_back(bi);
      } else {
        bond_seen[bi] = 1;
        survey(v);
      }
    }
  }

  void emit_digit(std::string& out, int digit) {
    if (digit < 10) {
      out += static_cast<char>('0' + digit);
    } else {
      out += '%';
      out += std::to_string(digit);
    }
  }

  void emit(uint32_t u, std::string& out) {
    append_atom(out, m, u);
    for (uint32_t bi : closes_at[u]) {
      emit_digit(out, bond_digit[bi]);
      digit_used[bond_digit[bi]] = false;
    }
    for (uint32_t bi : opens_at[u]) {
      int d = 1;
      while (digit_used[d]) ++d;
      digit_used[d] = true;
      bond_digit[bi] = d;
      append_bond(out, m, bi);
      emit_digit(out, d);
    }
    std::vector<uint32_t> children;
    for (uint32_t bi : ordered_bonds(u))
      if (bond_seen[bi] == 1 && !emitted_[m.bonds[bi].other(u)]) children.push_back(bi);
    for (size_t k = 0; k < children.size(); ++k) {
      uint32_t bi = children[k];
      uint32_t v = m.bonds[bi].other(u);
      emitted_[v] = true;
      bool last = (k + 1 == children.size());
      if (!last) out += '(';
      append_bond(out, m, bi);
      emit(v, out);
      if (!last) out += ')';
    }
  }

  std::string run(uint32_t start) {
    emitted_.assign(m.num_atoms(), false);
    survey(start);
    emitted_[start] = true;
    std::string out;
    emit(start, out);
    return out;
  }

 private:
  std::vector<bool> emitted_;
};

std::string write_with_ranks(const MolGraph& m, const std::vector<uint32_t>& rank) {
  size_t n = m.num_atoms();
  if (n == 0) return "";
  Writer w(m, rank);
  // one fragment per component, started at its lowest-rank atom
  std::vector<std::string> frags;
  while (true) {
    uint32_t start = UINT32_MAX;
    for (uint32_t i = 0; i < n; ++i)
      if (!w.visited[i] && (start == UINT32_MAX || rank[i] < rank[start])) start = i;
    if (start == UINT32_MAX) break;
    frags.push_back(w.run(start));
  }
  std::sort(frags.begin(), frags.end());
  std::string out;
  for (size_t k = 0; k < frags.size(); ++k) {
    if (k) out += '.';
    out += frags[k];
  }
  return out;
}

}  // namespace

std::string write_smiles(const MolGraph& mol) {
  std::vector<uint32_t> identity(mol.num_atoms());
  for (uint32_t i = 0; i < identity.size(); ++i) identity[i] = i;
  return write_with_ranks(mol, identity);
}

std::string canonical_smiles(const MolGraph& mol) {
  return write_with_ranks(mol, canonical_ranks(mol));
}

}  // namespace mtgen::chem
