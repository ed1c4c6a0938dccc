#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>
#include <string>

#include "mtgen/chem/mol.hpp"
#include "mtgen/chem/scaffold.hpp"
#include "mtgen/chem/smiles.hpp"
#include "mtgen/util/rng.hpp"
#include "test_util.hpp"

using namespace mtgen::chem;
using testutil::canon;
using testutil::must_parse;
using testutil::permuted;

TEST_CASE("implicit hydrogens follow the valence model") {
  MolGraph m = must_parse("CCO");
  REQUIRE(m.num_atoms() == 3);
  CHECK(m.atoms[0].total_h() == 3);
  CHECK(m.atoms[1].total_h() == 2);
  CHECK(m.atoms[2].total_h() == 1);

  MolGraph iso = must_parse("CC(C)C");
  CHECK(iso.atoms[1].total_h() == 1);

  MolGraph sulfone = must_parse("CS(=O)(=O)C");  // hexavalent S
  CHECK(sulfone.atoms[1].total_h() == 0);

  MolGraph nitro = must_parse("O=[N+]([O-])C");
  CHECK(nitro.atoms[1].formal_charge == 1);
  CHECK(nitro.atoms[1].total_h() == 0);
  CHECK(nitro.atoms[2].formal_charge == -1);

  MolGraph ammonium = must_parse("[NH4+]");
  CHECK(ammonium.atoms[0].total_h() == 4);
}

TEST_CASE("aromatic perception marks benzene and friends") {
  MolGraph bz = must_parse("c1ccccc1");
  REQUIRE(bz.num_atoms() == 6);
  int doubles = 0;
  for (const Bond& b : bz.bonds) {
    CHECK(b.order == BondOrder::Aromatic);
    if (b.kekule == BondOrder::Double) ++doubles;
  }
  CHECK(doubles == 3);
  for (const Atom& a : bz.atoms) {
    CHECK(a.aromatic);
    CHECK(a.total_h() == 1);
  }

  // kekule input is perceived as the same molecule
  CHECK(canon("C1=CC=CC=C1") == canon("c1ccccc1"));
  CHECK(canon("C1=CC=CN1") == canon("c1cc[nH]c1"));
  CHECK(canon("C1=CC=C2C=CC=CC2=C1") == canon("c1ccc2ccccc2c1"));

  // heteroaromatics
  for (const char* s : {"c1ccncc1", "c1cc[nH]c1", "c1ccoc1", "c1ccsc1", "c1c[nH]cn1"}) {
    MolGraph m = must_parse(s);
    for (const Atom& a : m.atoms) CHECK(a.aromatic);
  }

  // azulene is aromatic only as a fused 10-pi system
  MolGraph az = must_parse("c1ccc2cccc2cc1");
  for (const Atom& a : az.atoms) CHECK(a.aromatic);

  // pyridone: carbonyl carbon sits in the aromatic ring
  MolGraph pyridone = must_parse("O=c1cccc[nH]1");
  CHECK(pyridone.atoms[1].aromatic);
  CHECK_FALSE(pyridone.atoms[0].aromatic);

  // quinone is not aromatic
  MolGraph q = must_parse("O=C1C=CC(=O)C=C1");
  for (const Atom& a : q.atoms) CHECK_FALSE(a.aromatic);

  // cyclobutadiene written aromatic violates the electron count
  ParseResult r = parse_smiles("c1ccc1");
  REQUIRE_FALSE(r.ok());
  CHECK(r.diag.kind == ParseErrorKind::Valence);
}

TEST_CASE("parse errors carry kind and position") {
  SUBCASE("unclosed ring") {
    ParseResult r = parse_smiles("C1CC");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diag.kind == ParseErrorKind::UnclosedRing);
    CHECK(r.diag.position == 1);
  }
  SUBCASE("unclosed branch") {
    ParseResult r = parse_smiles("C(C");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diag.kind == ParseErrorKind::Syntax);
    CHECK(r.diag.position == 1);
  }
  SUBCASE("unmatched close") {
    ParseResult r = parse_smiles("CC)C");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diag.kind == ParseErrorKind::Syntax);
    CHECK(r.diag.position == 2);
  }
  SUBCASE("valence overflow") {
    ParseResult r = parse_smiles("C(C)(C)(C)(C)C");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diag.kind == ParseErrorKind::Valence);
  }
  SUBCASE("pentavalent bracket carbon") {
    ParseResult r = parse_smiles("[CH5]");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diag.kind == ParseErrorKind::Valence);
  }
  SUBCASE("stereo bonds are unsupported") {
    ParseResult r = parse_smiles("F/C=C/F");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diag.kind == ParseErrorKind::UnsupportedFeature);
    CHECK(r.diag.position == 1);
  }
  SUBCASE("tetrahedral centers are unsupported") {
    ParseResult r = parse_smiles("N[C@H](C)C(=O)O");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diag.kind == ParseErrorKind::UnsupportedFeature);
  }
  SUBCASE("isotopes are unsupported") {
    ParseResult r = parse_smiles("[13CH4]");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diag.kind == ParseErrorKind::UnsupportedFeature);
  }
  SUBCASE("elements outside the subset are unsupported") {
    ParseResult r = parse_smiles("C[Si](C)C");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diag.kind == ParseErrorKind::UnsupportedFeature);
  }
  SUBCASE("aromatic atom outside ring") {
    ParseResult r = parse_smiles("c1ccccc1c");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diag.kind == ParseErrorKind::Valence);
    CHECK(r.diag.position == 8);
  }
  SUBCASE("aromatic bond outside ring") {
    ParseResult r = parse_smiles("C:C");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diag.kind == ParseErrorKind::Valence);
  }
  SUBCASE("ring bond order conflict") {
    ParseResult r = parse_smiles("C=1CCCCC-1");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diag.kind == ParseErrorKind::Syntax);
  }
  SUBCASE("garbage") {
    CHECK_FALSE(parse_smiles("").ok());
    CHECK_FALSE(parse_smiles("1CC").ok());
    CHECK_FALSE(parse_smiles("C==C").ok());
    CHECK_FALSE(parse_smiles("C(=)C").ok());
    CHECK_FALSE(parse_smiles("C%1C").ok());
    CHECK_FALSE(parse_smiles("[C").ok());
    CHECK_FALSE(parse_smiles("[]").ok());
    CHECK_FALSE(parse_smiles("C11").ok());
  }
}

TEST_CASE("multi-fragment inputs parse and are flagged") {
  MolGraph m = must_parse("CC.O");
  CHECK(m.num_components() == 2);
  CHECK(canonical_smiles(m) == canon("O.CC"));
  CHECK(must_parse("CCO").num_components() == 1);
}

TEST_CASE("canonical form is stable under atom reordering") {
  const char* molecules[] = {
      "CCO",
      "CC(C)Cc1ccc(cc1)C(C)C(=O)O",          // ibuprofen-like
      "CC(=O)Oc1ccccc1C(=O)O",               // aspirin-like
      "c1ccc2ccccc2c1",                      // naphthalene
      "c1ccc2[nH]ccc2c1",                    // indole
      "O=c1cccc[nH]1",                       // pyridone
      "c1ccc(cc1)-c1ccccc1",                 // biphenyl
      "C1CCC2(CC1)CCCC2",                    // spiro
      "C1CC2CCC1CC2",                        // bridged bicycle
      "O=C(Nc1ccccc1)C1CCCN1",               // amide + pyrrolidine
      "CS(=O)(=O)N1CCc2ccccc21",             // sulfonamide fused
      "Clc1ccc(cc1)C(=O)NCCN1CCOCC1",        // morpholine amide
      "c1ccc2cccc2cc1",                      // azulene (hard case)
      "CC.O",                                // multi-fragment
  };
  mtgen::util::Rng rng = mtgen::util::Rng::derive(20260819, "canon-perm");
  for (const char* s : molecules) {
    MolGraph m = must_parse(s);
    std::string reference = canonical_smiles(m);
    CHECK(reference.size() > 0);
    for (int k = 0; k < 100; ++k) {
      MolGraph p = permuted(m, rng);
      CHECK(canonical_smiles(p) == reference);
    }
    // canonicalization is idempotent through a reparse
    CHECK(canon(reference) == reference);
  }
}

TEST_CASE("canonical form separates near-identical structures") {
  std::set<std::string> forms;
  forms.insert(canon("CCO"));       // ethanol
  forms.insert(canon("COC"));      // dimethyl ether
  forms.insert(canon("CC=O"));     // acetaldehyde
  forms.insert(canon("c1ccncc1"));  // pyridine
  forms.insert(canon("c1ccoc1"));   // furan
  CHECK(forms.size() == 5);
  CHECK(canon("OCC") == canon("CCO"));
  CHECK(canon("C(O)C") == canon("CCO"));
}

TEST_CASE("scaffolds keep rings, linkers and multiply bonded caps") {
  CHECK(murcko_scaffold_smiles(must_parse("Cc1ccccc1")) == canon("c1ccccc1"));
  CHECK(murcko_scaffold_smiles(must_parse("CCc1ccccc1")) == canon("c1ccccc1"));
  CHECK(murcko_scaffold_smiles(must_parse("CC(C)Cc1ccc(cc1)C(C)C(=O)O")) == canon("c1ccccc1"));
  // linker between two rings survives
  CHECK(murcko_scaffold_smiles(must_parse("c1ccc(cc1)Cc1ccccc1")) ==
        canon("c1ccc(cc1)Cc1ccccc1"));
  // exocyclic carbonyl is retained
  CHECK(murcko_scaffold_smiles(must_parse("O=C1CCCCC1")) == canon("O=C1CCCCC1"));
  CHECK(murcko_scaffold_smiles(must_parse("O=C(Nc1ccccc1)C1CCCN1")) ==
        canon("O=C(Nc1ccccc1)C1CCCN1"));
  // acyclic molecules have no scaffold
  CHECK(murcko_scaffold_smiles(must_parse("CCO")) == "");
  CHECK(murcko_scaffold_smiles(must_parse("CC(C)CC(=O)O")) == "");

  // idempotent
  const char* molecules[] = {"CC(C)Cc1ccc(cc1)C(C)C(=O)O", "O=C(Nc1ccccc1)C1CCCN1",
                             "CS(=O)(=O)N1CCc2ccccc21"};
  for (const char* s : molecules) {
    std::string first = murcko_scaffold_smiles(must_parse(s));
    REQUIRE(first.size() > 0);
    CHECK(murcko_scaffold_smiles(must_parse(first)) == first);
  }
}

TEST_CASE("smiles list files round-trip") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "mtgen_chem_test.smi";
  {
    FILE* f = fopen(path.string().c_str(), "w");
    REQUIRE(f);
    fputs("# comment line\n", f);
    fputs("CCO\tmol-1\n", f);
    fputs("\n", f);
    fputs("c1ccccc1  benzene\n", f);
    fputs("CC#N\tnitrile\n", f);  // '#' is a bond, not a comment
    fputs("CC(C)O\n", f);
    fclose(f);
  }
  auto recs = read_smiles_file(path.string());
  REQUIRE(recs.size() == 4);
  CHECK(recs[0].smiles == "CCO");
  CHECK(recs[0].id == "mol-1");
  CHECK(recs[0].line_no == 2);
  CHECK(recs[1].smiles == "c1ccccc1");
  CHECK(recs[1].id == "benzene");
  CHECK(recs[2].smiles == "CC#N");
  CHECK(recs[2].id == "nitrile");
  CHECK(recs[3].smiles == "CC(C)O");
  CHECK(recs[3].id.empty());

  fs::path out = fs::temp_directory_path() / "mtgen_chem_test_out.smi";
  write_smiles_file(out.string(), recs);
  auto back = read_smiles_file(out.string());
  REQUIRE(back.size() == recs.size());
  for (size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].smiles == recs[i].smiles);
    CHECK(back[i].id == recs[i].id);
  }
  fs::remove(path);
  fs::remove(out);
}

TEST_CASE("parser survives random input") {
  const std::string alphabet = "CcNnOoSsPpFIB()[]=#-+:123456789%.@/\\HKlr ";
  mtgen::util::Rng rng = mtgen::util::Rng::derive(20260819, "parse-fuzz");
  for (int iter = 0; iter < 3000; ++iter) {
    size_t len = 1 + rng.below(24);
    std::string s;
    for (size_t k = 0; k < len; ++k) s += alphabet[rng.below(alphabet.size())];
    ParseResult r = parse_smiles(s);
    if (!r.ok()) {
      CHECK(r.diag.kind != ParseErrorKind::None);
      CHECK(r.diag.position <= s.size());
      continue;
    }
    // whatever parses must canonicalize and round-trip
    std::string c = canonical_smiles(*r.mol);
    ParseResult rt = parse_smiles(c);
    REQUIRE_MESSAGE(rt.ok(), s, " -> ", c, ": ", rt.diag.message);
    CHECK(canonical_smiles(*rt.mol) == c);
  }
}
