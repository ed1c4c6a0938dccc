// Circular substructure fingerprints over hashed atom environments, the
// similarity currency of the whole pipeline (novelty checks, the similarity
// term of the scoring oracle, clustering distances).
#pragma once

#include <cstdint>
#include <vector>

#include "mtgen/chem/mol.hpp"

namespace mtgen::fp {

class Fingerprint {
 public:
  explicit Fingerprint(uint32_t n_bits = 2048) : n_bits_(n_bits), words_((n_bits + 63) / 64, 0) {}

  uint32_t n_bits() const { return n_bits_; }
  void set(uint32_t bit) { words_[bit / 64] |= (1ULL << (bit % 64)); }
  bool test(uint32_t bit) const { return words_[bit / 64] & (1ULL << (bit % 64)); }
  int popcount() const;
  const std::vector<uint64_t>& words() const { return words_; }

  bool operator==(const Fingerprint& o) const = default;

 private:
  uint32_t n_bits_;
  std::vector<uint64_t> words_;

  friend double tanimoto(const Fingerprint&, const Fingerprint&);
  friend Fingerprint fold(const Fingerprint&, uint32_t);
};

// Environment hashes for radii 0..radius, folded onto n_bits. n_bits must be
// a power of two so that folding commutes with bit assignment.
Fingerprint morgan_fingerprint(const chem::MolGraph& mol, int radius = 4,
                               uint32_t n_bits = 2048);

// Per-atom environment hash after `radius` widening rounds. radius 0 is the
// atom invariant itself. These ids key the synthetic-accessibility fragment
// table, so the recipe (invariant fields + splitmix64 mixing) is a stable
// on-disk contract.
std::vector<uint64_t> morgan_environments(const chem::MolGraph& mol, int radius);

// |a&b| / |a|b|; 1.0 when both are empty (indistinguishable).
double tanimoto(const Fingerprint& a, const Fingerprint& b);

// OR-fold down to n_bits (power of two dividing the source width).
Fingerprint fold(const Fingerprint& src, uint32_t n_bits);

}  // namespace mtgen::fp
