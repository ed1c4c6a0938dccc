#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>

#include "mtgen/smarts/smarts.hpp"
#include "test_util.hpp"

using namespace mtgen::smarts;
using mtgen::chem::MolGraph;
using testutil::must_parse;

namespace {

SmartsQuery must_pattern(const std::string& s) {
  SmartsParseResult r = parse_smarts(s);
  REQUIRE_MESSAGE(r.ok(), s, ": ", r.error);
  return std::move(*r.query);
}

size_t count_matches(const std::string& pattern, const std::string& smiles) {
  return find_matches(must_pattern(pattern), must_parse(smiles)).size();
}

// Reference matcher: enumerate every injective assignment of query atoms to
// molecule atoms, check all predicates and all query bonds. Exponential, so
// only for tiny inputs — that is the point: it cannot share bugs with the
// backtracking matcher's pruning.
std::set<std::vector<uint32_t>> oracle_matches(const SmartsQuery& q, const MolGraph& mol) {
  std::set<std::vector<uint32_t>> out;
  size_t nq = q.num_atoms();
  size_t nt = mol.num_atoms();
  if (nq > nt) return out;
  std::vector<uint32_t> map(nq, 0);
  std::vector<bool> used(nt, false);
  auto rec = [&](auto&& self, size_t k) -> void {
    if (k == nq) {
      for (const QueryBond& qb : q.bonds) {
        const mtgen::chem::Bond* tb = mol.bond_between(map[qb.a], map[qb.b]);
        if (!tb || !bond_matches(qb.expr, tb->order)) return;
      }
      out.insert(map);
      return;
    }
    for (uint32_t t = 0; t < nt; ++t) {
      if (used[t] || !atom_matches(q, static_cast<uint32_t>(k), mol, t)) continue;
      used[t] = true;
      map[k] = t;
      self(self, k + 1);
      used[t] = false;
    }
  };
  rec(rec, 0);
  return out;
}

}  // namespace

TEST_CASE("atom primitives select what they claim") {
  // toluene: one aliphatic carbon, six aromatic, five aromatic CH
  CHECK(count_matches("[#6]", "Cc1ccccc1") == 7);
  CHECK(count_matches("c", "Cc1ccccc1") == 6);
  CHECK(count_matches("C", "Cc1ccccc1") == 1);
  CHECK(count_matches("[cH]", "Cc1ccccc1") == 5);
  CHECK(count_matches("a", "Cc1ccccc1") == 6);
  CHECK(count_matches("A", "Cc1ccccc1") == 1);
  CHECK(count_matches("*", "Cc1ccccc1") == 7);

  // ring membership
  CHECK(count_matches("[R]", "C1CCCCC1") == 6);
  CHECK(count_matches("[R0]", "C1CCCCC1") == 0);
  CHECK(count_matches("[R0]", "CCCC") == 4);
  CHECK(count_matches("[R2]", "c1ccc2ccccc2c1") == 2);  // fusion atoms

  // charge
  CHECK(count_matches("[+]", "O=[N+]([O-])C") == 1);
  CHECK(count_matches("[-]", "O=[N+]([O-])C") == 1);
  CHECK(count_matches("[N+]", "O=[N+]([O-])C") == 1);
  CHECK(count_matches("[O-]", "O=[N+]([O-])C") == 1);

  // degree / hydrogens / connectivity
  CHECK(count_matches("[D1]", "CC(C)C") == 3);
  CHECK(count_matches("[D3]", "CC(C)C") == 1);
  CHECK(count_matches("[H3]", "CC(C)C") == 3);
  CHECK(count_matches("[X4]", "CC(C)C") == 4);
  CHECK(count_matches("[CX4H1]", "CC(C)C") == 1);

  // logic: or, and, not
  CHECK(count_matches("[#7,#8]", "NCCO") == 2);
  CHECK(count_matches("[!#6]", "NCCO") == 2);
  CHECK(count_matches("[C;!R]", "CC1CCC1") == 1);
  CHECK(count_matches("[c,n;R]", "c1ccncc1") == 6);
  CHECK(count_matches("[!C!N]", "NCCO") == 1);  // juxtaposed negations AND together
}

TEST_CASE("bond primitives constrain the edge") {
  CHECK(count_matches("C=O", "CC(=O)C") == 1);
  CHECK(count_matches("C-O", "CC(=O)C") == 0);
  CHECK(count_matches("C~O", "CC(=O)C") == 1);
  CHECK(count_matches("C#N", "CC#N") == 1);
  // default bond is single-or-aromatic
  CHECK(count_matches("cc", "c1ccccc1") == 12);
  CHECK(count_matches("c:c", "c1ccccc1") == 12);
  CHECK(count_matches("c-c", "c1ccccc1") == 0);
  CHECK(count_matches("c-c", "c1ccc(cc1)-c1ccccc1") == 2);  // biphenyl bridge
  CHECK(count_matches("CC", "c1ccccc1") == 0);
  // ring query on a ring molecule: all cyclic automorphisms
  CHECK(count_matches("C1CCC1", "C1CCC1") == 8);
  CHECK(count_matches("C1CCC1", "C1CCCC1") == 0);
}

TEST_CASE("matcher agrees with exhaustive enumeration") {
  const char* patterns[] = {
      "C",         "[#6]",      "[c,n]",   "[!C]",    "CC",      "C=O",    "C~*",
      "[D2]",      "[X3]",      "[R]",     "[R0]",    "[+]",     "CO",     "C(C)C",
      "[H2]",      "C1CCC1",    "cc",      "[a]",     "O~C~O",   "[!C!H0]",
  };
  const char* molecules[] = {
      "C",        "CC",      "CCO",      "CC(C)C",   "C1CCC1",  "C1=CC1", "CC#N",
      "O=C=O",    "OCC=O",   "C1CCCC1",  "c1ccoc1",  "C(N)=O",  "CC(=O)O", "C1CC1C",
      "O=[N+]([O-])C",       "c1cc[nH]c1",
  };
  for (const char* p : patterns) {
    SmartsQuery q = must_pattern(p);
    if (q.num_atoms() > 4) continue;
    for (const char* s : molecules) {
      MolGraph m = must_parse(s);
      if (m.num_atoms() > 8) continue;
      auto got_list = find_matches(q, m);
      std::set<std::vector<uint32_t>> got(got_list.begin(), got_list.end());
      CHECK(got.size() == got_list.size());  // matcher never emits duplicates
      auto want = oracle_matches(q, m);
      CHECK_MESSAGE(got == want, p, " on ", s, ": got ", got.size(), " want ", want.size());
    }
  }
}

TEST_CASE("pattern parse errors are reported") {
  CHECK_FALSE(parse_smarts("").ok());
  CHECK_FALSE(parse_smarts("C(").ok());
  CHECK_FALSE(parse_smarts("C1CC").ok());
  CHECK_FALSE(parse_smarts("[C").ok());
  CHECK_FALSE(parse_smarts("[]").ok());
  CHECK_FALSE(parse_smarts("[Q]").ok());
  CHECK_FALSE(parse_smarts("C..C").ok());
  CHECK_FALSE(parse_smarts("CC.CC").ok());  // must be connected
  CHECK_FALSE(parse_smarts("C==C").ok());
  CHECK_FALSE(parse_smarts("[#]").ok());
  SmartsParseResult r = parse_smarts("CC.CC");
  CHECK(r.position == 2);
}

TEST_CASE("catalogues load, match and report pattern ids") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "mtgen_catalogue_test.tsv";
  {
    FILE* f = fopen(path.string().c_str(), "w");
    REQUIRE(f);
    fputs("# structural alerts, tab separated\n", f);
    fputs("acyl-halide\t[Cl,Br,I]C=O\treactive carbonyl\n", f);
    fputs("aldehyde\t[CX3H1]=O\tcarbonyl\n", f);
    fputs("nitro\t[N+](=O)[O-]\tnitro group\n", f);
    fclose(f);
  }
  SmartsFilter filter(load_catalogue(path.string()));
  REQUIRE(filter.entries().size() == 3);
  CHECK(filter.entries()[0].pattern_id == "acyl-halide");
  CHECK(filter.entries()[0].family == "reactive carbonyl");

  CHECK(filter.passes(must_parse("CCO")));
  CHECK_FALSE(filter.passes(must_parse("CC(=O)Cl")));
  CHECK_FALSE(filter.passes(must_parse("CC=O")));
  CHECK(filter.passes(must_parse("CC(=O)C")));  // ketone is neither alert

  auto hits = filter.hits(must_parse("O=CC(=O)Br"));
  REQUIRE(hits.size() == 2);
  CHECK(hits[0] == "acyl-halide");
  CHECK(hits[1] == "aldehyde");

  auto nitro_hits = filter.hits(must_parse("O=[N+]([O-])c1ccccc1"));
  REQUIRE(nitro_hits.size() == 1);
  CHECK(nitro_hits[0] == "nitro");
  fs::remove(path);

  // malformed file: missing family column
  fs::path bad = fs::temp_directory_path() / "mtgen_catalogue_bad.tsv";
  {
    FILE* f = fopen(bad.string().c_str(), "w");
    REQUIRE(f);
    fputs("lonely\tC=O\n", f);
    fclose(f);
  }
  CHECK_THROWS(load_catalogue(bad.string()));
  fs::remove(bad);
}

TEST_CASE("predicate conjunction in brackets") {
  SmartsQuery q = must_pattern("[#7;+]");
  CHECK(q.num_atoms() == 1);
  CHECK(has_match(q, must_parse("C[N+](C)(C)C")));
  CHECK_FALSE(has_match(q, must_parse("CN")));        // nitrogen, not charged
  CHECK_FALSE(has_match(q, must_parse("CC(=O)[O-]"))); // charged, not nitrogen
  CHECK_FALSE(has_match(must_pattern("[N+]"), must_parse("CCO")));
}

TEST_CASE("unsupported primitives are named") {
  SmartsParseResult rec = parse_smarts("[$(C=O)]");
  REQUIRE_FALSE(rec.ok());
  CHECK(rec.error.find("unsupported primitive") != std::string::npos);
  CHECK(rec.error.find("recursive") != std::string::npos);

  SmartsParseResult chir = parse_smarts("[C@H]");
  REQUIRE_FALSE(chir.ok());
  CHECK(chir.error.find("unsupported primitive") != std::string::npos);
  CHECK(chir.error.find("chirality") != std::string::npos);

  SmartsParseResult iso = parse_smarts("[13C]");
  REQUIRE_FALSE(iso.ok());
  CHECK(iso.error.find("unsupported primitive") != std::string::npos);
  CHECK(iso.error.find("isotope") != std::string::npos);
}

TEST_CASE("bundled catalogues load and screen") {
  const std::string dir = std::string(MTGEN_TEST_DATA_DIR) + "/catalogues";
  const char* names[] = {"custom_motifs", "brenk_subset", "pains_subset",
                         "nih_subset", "chembl_subset"};
  std::vector<Catalogue> stage2;
  size_t total = 0;
  for (const char* name : names) {
    Catalogue cat = load_named_catalogue(dir + "/" + name + ".tsv", name);
    CHECK(cat.name == name);
    CHECK(!cat.patterns.empty());
    std::set<std::string> ids;
    for (const auto& e : cat.patterns) ids.insert(e.pattern_id);
    CHECK(ids.size() == cat.patterns.size());  // unique within the catalogue
    total += cat.patterns.size();
    if (std::string(name) != "custom_motifs") stage2.push_back(std::move(cat));
  }
  Catalogue alerts = load_named_catalogue(dir + "/qed_alerts.tsv", "qed_alerts");
  total += alerts.patterns.size();
  CHECK(total >= 60);

  // ethanol passes everything, alert carriers fail with ids attributed
  MolGraph ethanol = must_parse("CCO");
  ScreenReport ok = screen(ethanol, stage2);
  CHECK(ok.pass);
  CHECK(ok.hits.empty());
  for (const auto& cat : stage2)
    for (const auto& e : cat.patterns)
      CHECK_MESSAGE(!has_match(e.query, ethanol), cat.name, "/", e.pattern_id);

  MolGraph quinone = must_parse("O=C1C=CC(=O)C=C1");
  ScreenReport bad = screen(quinone, stage2);
  CHECK_FALSE(bad.pass);
  REQUIRE(!bad.hits.empty());
  bool quinone_hit = false;
  for (const auto& h : bad.hits)
    if (h.catalogue == "pains_subset" && h.pattern_id == "pa_para_quinone") quinone_hit = true;
  CHECK(quinone_hit);

  // empty catalogue list is a vacuous pass
  CHECK(screen(quinone, {}).pass);

  // monotone: adding catalogues never converts fail into pass
  std::vector<Catalogue> grow;
  bool failed = false;
  for (const char* name : names) {
    grow.push_back(load_named_catalogue(dir + "/" + name + ".tsv", name));
    bool now = screen(quinone, grow).pass;
    if (failed) CHECK_FALSE(now);
    failed = failed || !now;
  }
  CHECK(failed);
}

TEST_CASE("screening is invariant under molecule atom order") {
  const std::string dir = std::string(MTGEN_TEST_DATA_DIR) + "/catalogues";
  std::vector<Catalogue> cats;
  for (const char* name : {"custom_motifs", "brenk_subset", "pains_subset"})
    cats.push_back(load_named_catalogue(dir + "/" + std::string(name) + ".tsv", name));
  mtgen::util::Rng rng(7);
  for (const char* smi : {"O=C1C=CC(=O)C=C1", "C=CC=CC=C", "CCO", "N#Cc1ccccc1",
                          "OCC(O)c1ccc(O)c(O)c1", "C1OC1CN"}) {
    MolGraph mol = must_parse(smi);
    MolGraph shuf = testutil::permuted(mol, rng);
    ScreenReport a = screen(mol, cats);
    ScreenReport b = screen(shuf, cats);
    CHECK_MESSAGE(a.pass == b.pass, smi);
    CHECK_MESSAGE(a.hits.size() == b.hits.size(), smi);
  }
}
