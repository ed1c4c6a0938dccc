#include "mtgen/fp/fingerprint.hpp"

#include <algorithm>
#include <bit>
#include <cassert>

#include "mtgen/util/hash.hpp"

namespace mtgen::fp {

using chem::MolGraph;
using util::hash_combine;
using util::mix64;

int Fingerprint::popcount() const {
  int n = 0;
  for (uint64_t w : words_) n += std::popcount(w);
  return n;
}

namespace {

std::vector<uint64_t> initial_environments(const MolGraph& mol) {
  std::vector<uint64_t> env(mol.num_atoms());
  for (uint32_t i = 0; i < env.size(); ++i) {
    const chem::Atom& a = mol.atoms[i];
    uint64_t h = mix64(a.atomic_number);
    h = hash_combine(h, static_cast<uint64_t>(a.formal_charge + 16));
    h = hash_combine(h, mol.degree(i));
    h = hash_combine(h, a.total_h());
    h = hash_combine(h, mol.in_ring(i) ? 1 : 0);
    h = hash_combine(h, a.aromatic ? 1 : 0);
    env[i] = h;
  }
  return env;
}

// widen by one bond; neighbor multiset sorted for order freedom
std::vector<uint64_t> widen(const MolGraph& mol, const std::vector<uint64_t>& env, int round) {
  std::vector<uint64_t> next(env.size());
  for (uint32_t i = 0; i < env.size(); ++i) {
    std::vector<uint64_t> nb;
    for (uint32_t bi : mol.bonds_of(i)) {
      const chem::Bond& b = mol.bonds[bi];
      nb.push_back(hash_combine(mix64(static_cast<uint64_t>(b.order)), env[b.other(i)]));
    }
    std::sort(nb.begin(), nb.end());
    uint64_t h = hash_combine(mix64(static_cast<uint64_t>(round)), env[i]);
    for (uint64_t x : nb) h = hash_combine(h, x);
    next[i] = h;
  }
  return next;
}

}  // namespace

std::vector<uint64_t> morgan_environments(const MolGraph& mol, int radius) {
  std::vector<uint64_t> env = initial_environments(mol);
  for (int r = 1; r <= radius; ++r) env = widen(mol, env, r);
  return env;
}

Fingerprint morgan_fingerprint(const MolGraph& mol, int radius, uint32_t n_bits) {
  assert(n_bits > 0 && (n_bits & (n_bits - 1)) == 0);
  Fingerprint fp(n_bits);
  if (mol.num_atoms() == 0) return fp;
  std::vector<uint64_t> env = initial_environments(mol);
  for (uint64_t h : env) fp.set(static_cast<uint32_t>(h & (n_bits - 1)));
  for (int r = 1; r <= radius; ++r) {
    env = widen(mol, env, r);
    for (uint64_t h : env) fp.set(static_cast<uint32_t>(h & (n_bits - 1)));
  }
  return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  assert(a.n_bits_ == b.n_bits_);
  int both = 0, either = 0;
  for (size_t w = 0; w < a.words_.size(); ++w) {
    both += std::popcount(a.words_[w] & b.words_[w]);
    either += std::popcount(a.words_[w] | b.words_[w]);
  }
  return either == 0 ? 1.0 : static_cast<double>(both) / either;
}

Fingerprint fold(const Fingerprint& src, uint32_t n_bits) {
  assert(n_bits > 0 && (n_bits & (n_bits - 1)) == 0 && n_bits <= src.n_bits_);
  Fingerprint out(n_bits);
  for (uint32_t bit = 0; bit < src.n_bits_; ++bit)
    if (src.test(bit)) out.set(bit & (n_bits - 1));
  return out;
}

}  // namespace mtgen::fp
