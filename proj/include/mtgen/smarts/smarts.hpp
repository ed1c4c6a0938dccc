// Substructure query language over the molecular graph: atom predicates with
// !/&/,/; logic, bond primitives, ring closures and branches. Queries drive
// the structural-alert stage of candidate filtering.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtgen/chem/mol.hpp"

namespace mtgen::smarts {

struct AtomNode {
  enum class Op : uint8_t { Prim, Not, And, Or };
  enum class Prim : uint8_t {
    Any,                // *
    Element,            // #n, matches either aromatic state
    ElementAliphatic,   // C
    ElementAromatic,    // c
    Aromatic,           // a
    Aliphatic,          // A
    Charge,             // +, -, +2, ...
    Degree,             // D<n>: explicit connections
    TotalH,             // H<n>: hydrogen count
    Connectivity,       // X<n>: degree + hydrogens
    RingMember,         // R (value ignored), R0 negates via RingCount
    RingCount,          // R<n>: number of smallest rings through the atom
  };
  Op op = Op::Prim;
  Prim prim = Prim::Any;
  int16_t value = 0;
  int32_t lhs = -1;
  int32_t rhs = -1;
};

enum class BondExpr : uint8_t { Default, Single, Double, Triple, Aromatic, Any };

struct QueryBond {
  uint32_t a = 0;
  uint32_t b = 0;
  BondExpr expr = BondExpr::Default;

  uint32_t other(uint32_t atom) const { return atom == a ? b : a; }
};

struct SmartsQuery {
  std::string text;
  std::vector<int32_t> roots;  // per-atom predicate root into `nodes`
  std::vector<AtomNode> nodes;
  std::vector<QueryBond> bonds;
  std::vector<std::vector<uint32_t>> adj;  // atom -> bond indices

  size_t num_atoms() const { return roots.size(); }
};

struct SmartsParseResult {
  std::optional<SmartsQuery> query;
  size_t position = 0;
  std::string error;

  bool ok() const { return query.has_value(); }
};

// Queries must be connected (one fragment, no '.').
SmartsParseResult parse_smarts(std::string_view pattern);

bool atom_matches(const SmartsQuery& q, uint32_t query_atom, const chem::MolGraph& mol,
                  uint32_t atom);
bool bond_matches(BondExpr expr, chem::BondOrder order);

// All embeddings as target-atom vectors indexed by query atom. `max_matches`
// 0 means unbounded.
std::vector<std::vector<uint32_t>> find_matches(const SmartsQuery& q, const chem::MolGraph& mol,
                                                size_t max_matches = 0);
bool has_match(const SmartsQuery& q, const chem::MolGraph& mol);

// Alert catalogue: "pattern_id<TAB>SMARTS<TAB>family", '#' comments.
struct CatalogueEntry {
  std::string pattern_id;
  std::string smarts;
  std::string family;
  SmartsQuery query;
};

// Throws std::runtime_error naming the line on IO or pattern errors.
std::vector<CatalogueEntry> load_catalogue(const std::string& path);

class SmartsFilter {
 public:
  SmartsFilter() = default;
  explicit SmartsFilter(std::vector<CatalogueEntry> entries) : entries_(std::move(entries)) {}

  const std::vector<CatalogueEntry>& entries() const { return entries_; }

  // ids of every pattern with at least one embedding
  std::vector<std::string> hits(const chem::MolGraph& mol) const;
  bool passes(const chem::MolGraph& mol) const;

 private:
  std::vector<CatalogueEntry> entries_;
};

// A named pattern family (one catalogue file).
struct Catalogue {
  std::string name;
  std::vector<CatalogueEntry> patterns;
};

Catalogue load_named_catalogue(const std::string& path, const std::string& name);

struct ScreenHit {
  std::string catalogue;
  std::string pattern_id;
};

struct ScreenReport {
  bool pass = true;
  std::vector<ScreenHit> hits;  // every matching (catalogue, pattern) pair
};

// Fail iff any pattern in any catalogue matches. Empty list passes.
ScreenReport screen(const chem::MolGraph& mol, const std::vector<Catalogue>& catalogues);

}  // namespace mtgen::smarts
