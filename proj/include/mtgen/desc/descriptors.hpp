// Physicochemical property vector, drug-likeness (QED) and synthetic
// accessibility scores. Parameter tables ship as TSV data files; everything
// here is a pure function of the molecular graph and those tables.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtgen/chem/mol.hpp"
#include "mtgen/smarts/smarts.hpp"

namespace mtgen::desc {

struct PropertyVector {
  double mw = 0;      // Da, implicit hydrogens included
  double alogp = 0;   // atomic-contribution lipophilicity estimate
  int hba = 0;        // N/O acceptors
  int hbd = 0;        // N/O donors (atoms bearing >= 1 H)
  double psa = 0;     // polar surface area, A^2, N/O contributions
  int rotb = 0;       // rotatable bonds
  int arom = 0;       // aromatic ring count
  int alerts = 0;     // structural-alert patterns matched
};

// Asymmetric double sigmoid desirability curve.
struct AdsParams {
  double a = 0, b = 0, c = 0, d = 0, e = 1, f = 1, dmax = 1;
  double weight = 0;

  double operator()(double x) const;
};

class DescriptorSet {
 public:
  // Loads qed_params.tsv, alogp_contrib.tsv, psa_contrib.tsv,
  // sa_fragments.tsv and catalogues/qed_alerts.tsv from `data_dir`.
  // Throws std::runtime_error naming the offending file.
  static DescriptorSet load(const std::string& data_dir);

  // Throws std::invalid_argument on multi-fragment input.
  PropertyVector compute_properties(const chem::MolGraph& mol) const;

  // Weighted geometric mean of the desirability terms (the default variant);
  // `weighted = false` switches to the unweighted mean.
  double qed(const PropertyVector& props, bool weighted = true) const;
  double qed(const chem::MolGraph& mol, bool weighted = true) const;

  // Fragment-frequency score plus complexity penalties, rescaled to [1,10].
  double sa_score(const chem::MolGraph& mol) const;

  const std::array<AdsParams, 8>& qed_params() const { return qed_; }
  const smarts::SmartsFilter& alerts() const { return alerts_; }

 private:
  // property order: mw, alogp, hba, hbd, psa, rotb, arom, alerts
  std::array<AdsParams, 8> qed_{};

  struct LogpRow {
    uint8_t z = 0;
    int8_t aromatic = -1;  // -1 wildcard
    int8_t charge_set = 0;
    int8_t charge = 0;
    int8_t hetero_nbr = -1;
    int8_t multi_bond = -1;
    double value = 0;
  };
  std::vector<LogpRow> alogp_;

  struct PsaRow {
    uint8_t z = 0;
    bool aromatic = false;
    int8_t charge = 0;
    uint8_t h = 0;
    uint8_t n_single = 0, n_double = 0, n_triple = 0, n_aromatic = 0;
    bool ring3 = false;
    double value = 0;
  };
  std::vector<PsaRow> psa_;

  std::unordered_map<uint64_t, double> sa_fragments_;
  double sa_missing_ = -4.0;

  smarts::SmartsFilter alerts_;

  double alogp_contribution(const chem::MolGraph& mol, uint32_t atom) const;
  double psa_contribution(const chem::MolGraph& mol, uint32_t atom) const;
};

// Counting rules, exposed for tests.
int count_rotatable_bonds(const chem::MolGraph& mol);
int count_aromatic_rings(const chem::MolGraph& mol);
int count_hba(const chem::MolGraph& mol);
int count_hbd(const chem::MolGraph& mol);
double molecular_weight(const chem::MolGraph& mol);

// Ring-topology features for the SA complexity terms, exposed for tests.
struct RingComplexity {
  int n_spiro = 0;
  int n_bridgehead = 0;
  bool macrocycle = false;
};
RingComplexity ring_complexity(const chem::MolGraph& mol);

}  // namespace mtgen::desc
