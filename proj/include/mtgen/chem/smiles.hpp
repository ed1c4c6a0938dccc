// SMILES reader/writer for the supported organic subset. Stereochemistry and
// isotopes are deliberately out of scope and reported as unsupported rather
// than silently dropped.
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtgen/chem/mol.hpp"

namespace mtgen::chem {

enum class ParseErrorKind { None, Syntax, UnclosedRing, Valence, UnsupportedFeature };

std::string_view to_string(ParseErrorKind kind);

struct ParseDiagnostics {
  ParseErrorKind kind = ParseErrorKind::None;
  size_t position = 0;  // byte offset into the input string
  std::string message;
};

struct ParseResult {
  std::optional<MolGraph> mol;  // engaged on success, already finalized
  ParseDiagnostics diag;

  bool ok() const { return mol.has_value(); }
};

ParseResult parse_smiles(std::string_view smiles);

// Serialization of a finalized graph in input order (no canonicalization).
std::string write_smiles(const MolGraph& mol);

// Input-order-independent form. Multi-fragment graphs are written as their
// fragments' canonical strings sorted and joined with '.'.
std::string canonical_smiles(const MolGraph& mol);

// parse + canonicalize; nullopt when the string does not parse.
std::optional<std::string> canonical_smiles(std::string_view smiles);

// Canonical atom ranks (0..n-1, a permutation). Exposed for the fingerprint
// and scaffold layers, which need order-independent atom identity.
std::vector<uint32_t> canonical_ranks(const MolGraph& mol);

// List file: one record per line, "SMILES" or "SMILES<TAB>identifier".
// Lines whose first non-blank character is '#' are comments; '#' cannot start
// a trailing comment because it is the triple-bond symbol inside SMILES.
struct SmilesRecord {
  std::string smiles;
  std::string id;  // empty when the line has no identifier
  size_t line_no = 0;
};

// Throws std::runtime_error when the file cannot be opened.
std::vector<SmilesRecord> read_smiles_file(const std::string& path);
void write_smiles_file(const std::string& path, const std::vector<SmilesRecord>& records);

}  // namespace mtgen::chem
