// Attributed molecular graph: atoms, bonds, ring perception, aromaticity and
// the implicit-hydrogen/valence model. This is the substrate every filter and
// score in the pipeline operates on.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mtgen::chem {

enum class BondOrder : uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

// Chemistry-level failure (valence, aromaticity, kekulization). `atom` points
// at the offending atom when one is identifiable, else -1.
struct ChemError {
  std::string message;
  int32_t atom = -1;
};

struct Atom {
  uint8_t atomic_number = 0;
  int8_t formal_charge = 0;
  uint8_t explicit_h = 0;   // hydrogens written inside a bracket atom
  uint8_t implicit_h = 0;   // derived from the valence model
  bool aromatic = false;    // perceived, not as-written
  bool bracket = false;     // written as a bracket atom (H count is fixed)

  int total_h() const { return explicit_h + implicit_h; }
};

struct Bond {
  uint32_t a = 0;
  uint32_t b = 0;
  BondOrder order = BondOrder::Single;
  // Kekule order backing an aromatic bond (Single or Double). Equals `order`
  // for non-aromatic bonds.
  BondOrder kekule = BondOrder::Single;
  bool in_ring = false;
  // true when the input spelled ':' explicitly; a non-ring bond may default to
  // Aromatic between two aromatic atoms (biphenyl) but an explicit ':' outside
  // a ring is an error.
  bool aromatic_written = false;

  uint32_t other(uint32_t atom) const { return atom == a ? b : a; }
};

// One SSSR ring: atom indices in ring order.
using Ring = std::vector<uint32_t>;

class MolGraph {
 public:
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;

  size_t num_atoms() const { return atoms.size(); }
  size_t num_bonds() const { return bonds.size(); }

  const std::vector<uint32_t>& bonds_of(uint32_t atom) const { return adj_[atom]; }
  int degree(uint32_t atom) const { return static_cast<int>(adj_[atom].size()); }

  const Bond* bond_between(uint32_t a, uint32_t b) const;

  const std::vector<Ring>& sssr() const { return sssr_; }
  int ring_count(uint32_t atom) const { return atom_ring_count_[atom]; }
  bool in_ring(uint32_t atom) const { return atom_ring_count_[atom] > 0; }
  bool in_ring_of_size(uint32_t atom, size_t size) const;

  int num_components() const { return n_components_; }

  // Sum of bond orders at `atom` using kekule orders (aromatic resolved).
  int valence_sum(uint32_t atom) const;

  // Rebuilds adjacency, ring info, kekule assignment, aromatic perception and
  // implicit hydrogens. `assign_implicit_h` is false when hydrogen counts are
  // already final (e.g. scaffold extraction keeps the source counts only for
  // bracket atoms). Returns an error message on chemically invalid input.
  std::optional<ChemError> finalize(bool assign_implicit_h = true);

  // Subgraph copy over `keep_atoms` (indices into this graph); bonds between
  // kept atoms survive with their kekule orders. Caller must finalize().
  MolGraph subgraph(const std::vector<uint32_t>& keep_atoms) const;

 private:
  std::optional<ChemError> perceive_rings();
  std::optional<ChemError> kekulize_written_aromatics();
  void perceive_aromaticity();
  std::optional<ChemError> assign_hydrogens(bool assign_implicit);

  std::vector<std::vector<uint32_t>> adj_;
  std::vector<Ring> sssr_;
  std::vector<int> atom_ring_count_;
  int n_components_ = 0;
};

// ---- element / valence model -------------------------------------------

// Organic-subset elements supported in v1 (bracket atoms use the same set).
bool element_supported(int atomic_number);
int atomic_number_of(std::string_view symbol);   // 0 when unknown
const char* symbol_of(int atomic_number);
double atomic_mass(int atomic_number);
bool element_can_be_aromatic(int atomic_number);

// Default valences (B3 C4 N3 O2 P3/5 S2/4/6 halogens 1), charge-adjusted:
// B: v - charge, C: v - |charge|, N/O/P/S/halogen: v + charge.
std::vector<int> allowed_valences(int atomic_number, int charge);

}  // namespace mtgen::chem
