#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mtgen/chem/smiles.hpp"
#include "mtgen/desc/descriptors.hpp"
#include "mtgen/util/rng.hpp"
#include "test_util.hpp"

using mtgen::chem::read_smiles_file;
using mtgen::desc::DescriptorSet;
using mtgen::desc::PropertyVector;
using testutil::must_parse;
using testutil::permuted;

namespace {

const DescriptorSet& tables() {
  static DescriptorSet ds = DescriptorSet::load(MTGEN_TEST_DATA_DIR);
  return ds;
}

struct PanelRow {
  std::string id, smiles;
  double mw, alogp, psa, qed, sa;
  int hba, hbd, rotb, arom, alerts;
};

std::vector<PanelRow> load_panel() {
  std::ifstream in(std::string(MTGEN_TEST_FIXTURE_DIR) + "/descriptor_panel.tsv");
  REQUIRE(in.good());
  std::vector<PanelRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    PanelRow r;
    std::string field;
    auto next = [&] {
      REQUIRE(std::getline(ss, field, '\t'));
      return field;
    };
    r.id = next();
    r.smiles = next();
    r.mw = std::stod(next());
    r.alogp = std::stod(next());
    r.hba = std::stoi(next());
    r.hbd = std::stoi(next());
    r.psa = std::stod(next());
    r.rotb = std::stoi(next());
    r.arom = std::stoi(next());
    r.alerts = std::stoi(next());
    r.qed = std::stod(next());
    r.sa = std::stod(next());
    rows.push_back(r);
  }
  return rows;
}

// Spearman rank correlation with midranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<size_t> idx(v.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    size_t i = 0;
    while (i < idx.size()) {
      size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (size_t k = i; k <= j; ++k) r[idx[k]] = mid;
      i = j + 1;
    }
    return r;
  };
  std::vector<double> rx = ranks(x), ry = ranks(y);
  double mx = 0, my = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(rx.size());
  my /= static_cast<double>(ry.size());
  double num = 0, dx = 0, dy = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  return num / std::sqrt(dx * dy);
}

std::vector<std::string> corpus_smiles() {
  std::vector<std::string> all;
  for (const char* name : {"/corpora/general.smi", "/corpora/sa_reference.smi",
                           "/corpora/specific_pool.smi"}) {
    for (const auto& rec : read_smiles_file(std::string(MTGEN_TEST_DATA_DIR) + name))
      all.push_back(rec.smiles);
  }
  return all;
}

}  // namespace

TEST_CASE("ethanol property vector") {
  PropertyVector p = tables().compute_properties(must_parse("CCO"));
  CHECK(std::abs(p.mw - 46.07) < 0.01);
  CHECK(p.hbd == 1);
  CHECK(p.hba == 1);
  CHECK(p.rotb == 0);
  CHECK(p.arom == 0);
  CHECK(p.alerts == 0);
}

TEST_CASE("benzene property vector") {
  PropertyVector p = tables().compute_properties(must_parse("c1ccccc1"));
  CHECK(p.arom == 1);
  CHECK(p.hbd == 0);
  CHECK(p.hba == 0);
  CHECK(p.rotb == 0);
  CHECK(std::abs(p.mw - 78.11) < 0.01);
}

TEST_CASE("simple count descriptors behave") {
  const DescriptorSet& ds = tables();
  // amide C-N bond is not rotatable, the N-phenyl bond is
  PropertyVector acetanilide = ds.compute_properties(must_parse("CC(=O)Nc1ccccc1"));
  CHECK(acetanilide.rotb == 1);
  // aromatic N-H counts as donor but not acceptor
  PropertyVector pyrrole = ds.compute_properties(must_parse("c1cc[nH]c1"));
  CHECK(pyrrole.hba == 0);
  CHECK(pyrrole.hbd == 1);
  // pyridine N: acceptor, no donor
  PropertyVector pyridine = ds.compute_properties(must_parse("c1ccncc1"));
  CHECK(pyridine.hba == 1);
  CHECK(pyridine.hbd == 0);
  // naphthalene: two aromatic SSSR rings
  CHECK(ds.compute_properties(must_parse("c1ccc2ccccc2c1")).arom == 2);
  // alkyl halide alert fires
  CHECK(ds.compute_properties(must_parse("ClCc1ccccc1")).alerts == 1);
}

TEST_CASE("multi-fragment input is rejected") {
  CHECK_THROWS_AS((void)tables().compute_properties(must_parse("CC.O")),
                  std::invalid_argument);
}

TEST_CASE("ethanol is easy to synthesize") {
  CHECK(tables().sa_score(must_parse("CCO")) < 3.0);
}

TEST_CASE("qed and sa stay within their ranges over the corpus") {
  const DescriptorSet& ds = tables();
  size_t n = 0;
  for (const std::string& smi : corpus_smiles()) {
    auto mol = must_parse(smi);
    double q = ds.qed(mol);
    double sa = ds.sa_score(mol);
    CHECK_MESSAGE(q > 0.0, smi);
    CHECK_MESSAGE(q <= 1.0, smi);
    CHECK_MESSAGE(sa >= 1.0, smi);
    CHECK_MESSAGE(sa <= 10.0, smi);
    ++n;
  }
  CHECK(n > 400);
}

TEST_CASE("scores are invariant under atom-order permutation") {
  const DescriptorSet& ds = tables();
  mtgen::util::Rng rng(20240817);
  std::vector<std::string> all = corpus_smiles();
  for (size_t i = 0; i < all.size(); i += 7) {
    auto mol = must_parse(all[i]);
    auto shuffled = permuted(mol, rng);
    CHECK(ds.qed(mol) == doctest::Approx(ds.qed(shuffled)).epsilon(1e-9));
    CHECK(ds.sa_score(mol) == doctest::Approx(ds.sa_score(shuffled)).epsilon(1e-9));
  }
}

TEST_CASE("scores are invariant under input notation") {
  const DescriptorSet& ds = tables();
  const std::pair<const char*, const char*> same[] = {
      {"c1ccccc1", "C1=CC=CC=C1"},
      {"c1ccncc1", "C1=CC=NC=C1"},
      {"CC(=O)Oc1ccccc1C(=O)O", "OC(=O)c1ccccc1OC(C)=O"},
      {"Cn1cnc2c1c(=O)n(C)c(=O)n2C", "O=c1n(C)c(=O)n(C)c2ncn(C)c12"},
  };
  for (auto [a, b] : same) {
    auto ma = must_parse(a);
    auto mb = must_parse(b);
    PropertyVector pa = ds.compute_properties(ma);
    PropertyVector pb = ds.compute_properties(mb);
    CHECK_MESSAGE(pa.alogp == doctest::Approx(pb.alogp).epsilon(1e-9), a);
    CHECK_MESSAGE(pa.psa == doctest::Approx(pb.psa).epsilon(1e-9), a);
    CHECK(pa.hba == pb.hba);
    CHECK(pa.hbd == pb.hbd);
    CHECK(pa.rotb == pb.rotb);
    CHECK(pa.arom == pb.arom);
    CHECK(pa.alerts == pb.alerts);
    CHECK_MESSAGE(ds.sa_score(ma) == doctest::Approx(ds.sa_score(mb)).epsilon(1e-9), a);
  }
}

TEST_CASE("alerts desirability never rises with more alerts") {
  const mtgen::desc::AdsParams& alerts = tables().qed_params()[7];
  double prev = alerts(0.0);
  for (int k = 1; k <= 6; ++k) {
    double cur = alerts(static_cast<double>(k));
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
  // removing the alert-matching substructure from an otherwise identical
  // property vector never lowers QED
  PropertyVector with = tables().compute_properties(must_parse("ClCc1ccccc1"));
  REQUIRE(with.alerts == 1);
  PropertyVector without = with;
  without.alerts = 0;
  CHECK(tables().qed(without) >= tables().qed(with));
}

TEST_CASE("aspirin matches the reference fixture row") {
  auto rows = load_panel();
  auto it = std::find_if(rows.begin(), rows.end(),
                         [](const PanelRow& r) { return r.id == "aspirin"; });
  REQUIRE(it != rows.end());
  const DescriptorSet& ds = tables();
  auto mol = must_parse(it->smiles);
  PropertyVector p = ds.compute_properties(mol);
  CHECK(std::abs(p.mw - it->mw) < 0.01);
  CHECK(std::abs(p.alogp - it->alogp) < 1e-3);
  CHECK(p.hba == it->hba);
  CHECK(p.hbd == it->hbd);
  CHECK(std::abs(p.psa - it->psa) < 1e-3);
  CHECK(p.rotb == it->rotb);
  CHECK(p.arom == it->arom);
  CHECK(p.alerts == it->alerts);
  CHECK(std::abs(ds.qed(p) - it->qed) < 0.05);
  CHECK(std::abs(ds.sa_score(mol) - it->sa) < 1.0);
}

TEST_CASE("descriptor panel fidelity") {
  auto rows = load_panel();
  REQUIRE(rows.size() == 50);
  const DescriptorSet& ds = tables();
  std::vector<double> q_ref, q_got, sa_ref, sa_got;
  for (const PanelRow& r : rows) {
    auto mol = must_parse(r.smiles);
    PropertyVector p = ds.compute_properties(mol);
    CHECK_MESSAGE(p.hba == r.hba, r.id);
    CHECK_MESSAGE(p.hbd == r.hbd, r.id);
    CHECK_MESSAGE(p.rotb == r.rotb, r.id);
    CHECK_MESSAGE(p.arom == r.arom, r.id);
    CHECK_MESSAGE(p.alerts == r.alerts, r.id);
    CHECK_MESSAGE(std::abs(p.mw - r.mw) < 0.01, r.id);
    CHECK_MESSAGE(std::abs(p.alogp - r.alogp) < 1e-3, r.id);
    CHECK_MESSAGE(std::abs(p.psa - r.psa) < 1e-3, r.id);
    double q = ds.qed(p);
    double sa = ds.sa_score(mol);
    CHECK_MESSAGE(std::abs(q - r.qed) <= 0.05, r.id, " qed ", q, " vs ", r.qed);
    CHECK_MESSAGE(std::abs(sa - r.sa) <= 1.0, r.id, " sa ", sa, " vs ", r.sa);
    q_ref.push_back(r.qed);
    q_got.push_back(q);
    sa_ref.push_back(r.sa);
    sa_got.push_back(sa);
  }
  CHECK(spearman(q_ref, q_got) >= 0.9);
  CHECK(spearman(sa_ref, sa_got) >= 0.9);
  // the fixture itself must exercise a real spread
  CHECK(*std::max_element(sa_ref.begin(), sa_ref.end()) > 4.0);
  CHECK(*std::min_element(sa_ref.begin(), sa_ref.end()) < 2.0);
}
