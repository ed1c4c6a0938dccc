#include <doctest.h>

#include "mtgen/fp/fingerprint.hpp"
#include "mtgen/util/rng.hpp"
#include "test_util.hpp"

using mtgen::fp::Fingerprint;
using mtgen::fp::fold;
using mtgen::fp::morgan_fingerprint;
using mtgen::fp::tanimoto;
using testutil::must_parse;
using testutil::permuted;

namespace {

const char* kMolecules[] = {
    "CCO",
    "CCCO",
    "c1ccccc1",
    "Cc1ccccc1",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "CC(=O)Oc1ccccc1C(=O)O",
    "O=C(Nc1ccccc1)C1CCCN1",
    "CS(=O)(=O)N1CCc2ccccc21",
    "Clc1ccc(cc1)C(=O)NCCN1CCOCC1",
    "c1ccc2[nH]ccc2c1",
};

}  // namespace

TEST_CASE("fingerprints ignore atom order") {
  mtgen::util::Rng rng = mtgen::util::Rng::derive(20260819, "fp-perm");
  for (const char* s : kMolecules) {
    auto m = must_parse(s);
    Fingerprint reference = morgan_fingerprint(m);
    CHECK(reference.popcount() > 0);
    for (int k = 0; k < 50; ++k) {
      auto p = permuted(m, rng);
      CHECK(morgan_fingerprint(p) == reference);
    }
  }
}

TEST_CASE("tanimoto is a bounded symmetric similarity") {
  std::vector<Fingerprint> fps;
  for (const char* s : kMolecules) fps.push_back(morgan_fingerprint(must_parse(s)));
  for (const auto& a : fps) {
    CHECK(tanimoto(a, a) == 1.0);
    for (const auto& b : fps) {
      double t = tanimoto(a, b);
      CHECK(t >= 0.0);
      CHECK(t <= 1.0);
      CHECK(t == tanimoto(b, a));
    }
  }
  // relatedness ordering: ethanol looks more like propanol than like benzene
  double close = tanimoto(fps[0], fps[1]);
  double far = tanimoto(fps[0], fps[2]);
  CHECK(close > far);
  // toluene shares the ring with benzene
  CHECK(tanimoto(fps[2], fps[3]) > tanimoto(fps[2], fps[0]));
  // both empty counts as identical
  CHECK(tanimoto(Fingerprint(64), Fingerprint(64)) == 1.0);
}

TEST_CASE("folding halves the width and commutes with hashing") {
  for (const char* s : kMolecules) {
    auto m = must_parse(s);
    Fingerprint wide = morgan_fingerprint(m, 4, 2048);
    for (uint32_t bits : {1024u, 512u, 256u}) {
      Fingerprint folded = fold(wide, bits);
      CHECK(folded.n_bits() == bits);
      // OR-fold identity
      for (uint32_t b = 0; b < bits; ++b) {
        bool any = false;
        for (uint32_t src = b; src < 2048; src += bits) any = any || wide.test(src);
        CHECK(folded.test(b) == any);
      }
      // hashing directly at the narrow width gives the same bits
      CHECK(folded == morgan_fingerprint(m, 4, bits));
    }
  }
}

TEST_CASE("different structures get different fingerprints") {
  Fingerprint a = morgan_fingerprint(must_parse("CCO"));
  Fingerprint b = morgan_fingerprint(must_parse("CCN"));
  Fingerprint c = morgan_fingerprint(must_parse("COC"));
  CHECK(!(a == b));
  CHECK(!(a == c));
  CHECK(tanimoto(a, b) < 1.0);
  // radius widens the neighborhood: radius 0 cannot see past the atom
  auto hexane = must_parse("CCCCCC");
  auto cyclohexane = must_parse("C1CCCCC1");
  Fingerprint h0 = morgan_fingerprint(hexane, 0);
  Fingerprint c0 = morgan_fingerprint(cyclohexane, 0);
  CHECK(h0.popcount() > 0);
  CHECK(c0.popcount() > 0);
  CHECK(!(h0 == c0));  // ring flag differs even at radius 0
}
