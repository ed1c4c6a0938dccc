#include "mtgen/desc/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mtgen/fp/fingerprint.hpp"

namespace mtgen::desc {

using chem::BondOrder;
using chem::MolGraph;

namespace {

constexpr double kHydrogenMass = 1.008;

std::vector<std::vector<std::string>> read_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

int8_t parse_flag(const std::string& s) { return s == "*" ? -1 : static_cast<int8_t>(std::stoi(s)); }

bool is_hetero(uint8_t z) { return z != 6 && z != 1; }

bool has_multi_bond(const MolGraph& m, uint32_t atom) {
  for (uint32_t bi : m.bonds_of(atom)) {
    BondOrder o = m.bonds[bi].kekule;
    if (o == BondOrder::Double || o == BondOrder::Triple) return true;
  }
  return false;
}

bool has_hetero_neighbor(const MolGraph& m, uint32_t atom) {
  for (uint32_t bi : m.bonds_of(atom))
    if (is_hetero(m.atoms[m.bonds[bi].other(atom)].atomic_number)) return true;
  return false;
}

}  // namespace

double AdsParams::operator()(double x) const {
  double rise = 1.0 / (1.0 + std::exp(-(x - c + d / 2.0) / e));
  double fall = 1.0 - 1.0 / (1.0 + std::exp(-(x - c - d / 2.0) / f));
  return a + b * rise * fall;
}

DescriptorSet DescriptorSet::load(const std::string& data_dir) {
  DescriptorSet ds;

  // qed_params.tsv: property a b c d e f dmax weight
  {
    const std::string path = data_dir + "/qed_params.tsv";
    static const char* kOrder[8] = {"mw", "alogp", "hba", "hbd", "psa", "rotb", "arom", "alerts"};
    std::array<bool, 8> seen{};
    for (const auto& row : read_tsv(path)) {
      if (row.size() != 9) throw std::runtime_error(path + ": expected 9 columns");
      int idx = -1;
      for (int k = 0; k < 8; ++k)
        if (row[0] == kOrder[k]) idx = k;
      if (idx < 0) throw std::runtime_error(path + ": unknown property " + row[0]);
      AdsParams& p = ds.qed_[idx];
      p.a = std::stod(row[1]);
      p.b = std::stod(row[2]);
      p.c = std::stod(row[3]);
      p.d = std::stod(row[4]);
      p.e = std::stod(row[5]);
      p.f = std::stod(row[6]);
      p.dmax = std::stod(row[7]);
      p.weight = std::stod(row[8]);
      seen[idx] = true;
    }
    for (int k = 0; k < 8; ++k)
      if (!seen[k]) throw std::runtime_error(path + ": missing property " + kOrder[k]);
  }

  // alogp_contrib.tsv: symbol aromatic charge hetero_nbr multi_bond value
  // ('*' wildcards; first matching row wins)
  {
    const std::string path = data_dir + "/alogp_contrib.tsv";
    for (const auto& row : read_tsv(path)) {
      if (row.size() != 6) throw std::runtime_error(path + ": expected 6 columns");
      LogpRow r;
      int z = chem::atomic_number_of(row[0]);
      if (z <= 0) throw std::runtime_error(path + ": unknown element " + row[0]);
      r.z = static_cast<uint8_t>(z);
      r.aromatic = parse_flag(row[1]);
      if (row[2] == "*") {
        r.charge_set = 0;
      } else {
        r.charge_set = 1;
        r.charge = static_cast<int8_t>(std::stoi(row[2]));
      }
      r.hetero_nbr = parse_flag(row[3]);
      r.multi_bond = parse_flag(row[4]);
      r.value = std::stod(row[5]);
      ds.alogp_.push_back(r);
    }
    if (ds.alogp_.empty()) throw std::runtime_error(path + ": no rows");
  }

  // psa_contrib.tsv: symbol aromatic charge h ns nd nt na ring3 value
  {
    const std::string path = data_dir + "/psa_contrib.tsv";
    for (const auto& row : read_tsv(path)) {
      if (row.size() != 10) throw std::runtime_error(path + ": expected 10 columns");
      PsaRow r;
      int z = chem::atomic_number_of(row[0]);
      if (z <= 0) throw std::runtime_error(path + ": unknown element " + row[0]);
      r.z = static_cast<uint8_t>(z);
      r.aromatic = row[1] == "1";
      r.charge = static_cast<int8_t>(std::stoi(row[2]));
      r.h = static_cast<uint8_t>(std::stoi(row[3]));
      r.n_single = static_cast<uint8_t>(std::stoi(row[4]));
      r.n_double = static_cast<uint8_t>(std::stoi(row[5]));
      r.n_triple = static_cast<uint8_t>(std::stoi(row[6]));
      r.n_aromatic = static_cast<uint8_t>(std::stoi(row[7]));
      r.ring3 = row[8] == "1";
      r.value = std::stod(row[9]);
      ds.psa_.push_back(r);
    }
    if (ds.psa_.empty()) throw std::runtime_error(path + ": no rows");
  }

  // sa_fragments.tsv: env_id_hex value
  {
    const std::string path = data_dir + "/sa_fragments.tsv";
    for (const auto& row : read_tsv(path)) {
      if (row.size() != 2) throw std::runtime_error(path + ": expected 2 columns");
      if (row[0] == "missing") {
        ds.sa_missing_ = std::stod(row[1]);
        continue;
      }
      uint64_t id = std::stoull(row[0], nullptr, 16);
      ds.sa_fragments_[id] = std::stod(row[1]);
    }
  }

  ds.alerts_ = smarts::SmartsFilter(smarts::load_catalogue(data_dir + "/catalogues/qed_alerts.tsv"));
  return ds;
}

// ---- counting rules ---------------------------------------------------------

double molecular_weight(const MolGraph& mol) {
  double mw = 0;
  for (uint32_t i = 0; i < mol.num_atoms(); ++i) {
    const chem::Atom& a = mol.atoms[i];
    mw += chem::atomic_mass(a.atomic_number) + kHydrogenMass * a.total_h();
  }
  return mw;
}

int count_hba(const MolGraph& mol) {
  int n = 0;
  for (uint32_t i = 0; i < mol.num_atoms(); ++i) {
    const chem::Atom& a = mol.atoms[i];
    if (a.atomic_number != 7 && a.atomic_number != 8) continue;
    // pyrrole-type nitrogen donates its lone pair into the ring
    if (a.atomic_number == 7 && a.aromatic && a.total_h() > 0) continue;
    ++n;
  }
  return n;
}

int count_hbd(const MolGraph& mol) {
  int n = 0;
  for (const chem::Atom& a : mol.atoms)
    if ((a.atomic_number == 7 || a.atomic_number == 8) && a.total_h() > 0) ++n;
  return n;
}

int count_rotatable_bonds(const MolGraph& mol) {
  int n = 0;
  for (const chem::Bond& b : mol.bonds) {
    if (b.order != BondOrder::Single || b.in_ring) continue;
    if (mol.degree(b.a) < 2 || mol.degree(b.b) < 2) continue;
    // amide C-N bonds are effectively rigid
    auto amide = [&](uint32_t nitrogen, uint32_t carbon) {
      if (mol.atoms[nitrogen].atomic_number != 7) return false;
      if (mol.atoms[carbon].atomic_number != 6) return false;
      for (uint32_t bi : mol.bonds_of(carbon)) {
        const chem::Bond& cb = mol.bonds[bi];
        if (cb.kekule == BondOrder::Double && mol.atoms[cb.other(carbon)].atomic_number == 8)
          return true;
      }
      return false;
    };
    if (amide(b.a, b.b) || amide(b.b, b.a)) continue;
    ++n;
  }
  return n;
}

int count_aromatic_rings(const MolGraph& mol) {
  int n = 0;
  for (const chem::Ring& ring : mol.sssr()) {
    bool all = true;
    for (uint32_t a : ring) all = all && mol.atoms[a].aromatic;
    if (all) ++n;
  }
  return n;
}

RingComplexity ring_complexity(const MolGraph& mol) {
  RingComplexity rc;
  const auto& rings = mol.sssr();
  std::set<uint32_t> spiro, bridge;
  for (size_t i = 0; i < rings.size(); ++i) {
    if (rings[i].size() > 8) rc.macrocycle = true;
    for (size_t j = i + 1; j < rings.size(); ++j) {
      std::set<uint32_t> a(rings[i].begin(), rings[i].end());
      std::vector<uint32_t> shared;
      for (uint32_t x : rings[j])
        if (a.count(x)) shared.push_back(x);
      if (shared.size() == 1) {
        spiro.insert(shared[0]);
      } else if (shared.size() >= 3) {
        // ends of the shared path: exactly one bonded neighbor inside it
        std::set<uint32_t> s(shared.begin(), shared.end());
        for (uint32_t x : shared) {
          int inside = 0;
          for (uint32_t bi : mol.bonds_of(x))
            if (s.count(mol.bonds[bi].other(x))) ++inside;
          if (inside == 1) bridge.insert(x);
        }
      }
    }
  }
  rc.n_spiro = static_cast<int>(spiro.size());
  rc.n_bridgehead = static_cast<int>(bridge.size());
  return rc;
}

// ---- table application ------------------------------------------------------

double DescriptorSet::alogp_contribution(const MolGraph& mol, uint32_t atom) const {
  const chem::Atom& a = mol.atoms[atom];
  bool het = has_hetero_neighbor(mol, atom);
  bool multi = has_multi_bond(mol, atom);
  for (const LogpRow& r : alogp_) {
    if (r.z != a.atomic_number) continue;
    if (r.aromatic >= 0 && r.aromatic != (a.aromatic ? 1 : 0)) continue;
    if (r.charge_set && r.charge != a.formal_charge) continue;
    if (r.hetero_nbr >= 0 && r.hetero_nbr != (het ? 1 : 0)) continue;
    if (r.multi_bond >= 0 && r.multi_bond != (multi ? 1 : 0)) continue;
    return r.value;
  }
  return 0.0;
}

double DescriptorSet::psa_contribution(const MolGraph& mol, uint32_t atom) const {
  const chem::Atom& a = mol.atoms[atom];
  if (a.atomic_number != 7 && a.atomic_number != 8) return 0.0;
  int ns = 0, nd = 0, nt = 0, na = 0;
  for (uint32_t bi : mol.bonds_of(atom)) {
    switch (mol.bonds[bi].order) {
      case BondOrder::Single: ++ns; break;
      case BondOrder::Double: ++nd; break;
      case BondOrder::Triple: ++nt; break;
      case BondOrder::Aromatic: ++na; break;
    }
  }
  bool ring3 = mol.in_ring_of_size(atom, 3);
  for (const PsaRow& r : psa_) {
    if (r.z != a.atomic_number || r.aromatic != a.aromatic) continue;
    if (r.charge != a.formal_charge || r.h != a.total_h()) continue;
    if (r.n_single != ns || r.n_double != nd || r.n_triple != nt || r.n_aromatic != na) continue;
    if (r.ring3 != ring3) continue;
    return r.value;
  }
  // unparameterized polar atom: degree/hydrogen fallback
  int x = mol.degree(atom) + a.total_h();
  double v = (a.atomic_number == 7) ? 30.5 - x * 8.2 + a.total_h() * 1.5
                                    : 28.5 - x * 8.6 + a.total_h() * 1.5;
  return std::max(0.0, v);
}

// ---- the three public scores ------------------------------------------------

PropertyVector DescriptorSet::compute_properties(const MolGraph& mol) const {
  if (mol.num_components() > 1)
    throw std::invalid_argument("properties are defined for single-fragment molecules");
  PropertyVector p;
  p.mw = molecular_weight(mol);
  for (uint32_t i = 0; i < mol.num_atoms(); ++i) {
    p.alogp += alogp_contribution(mol, i);
    p.psa += psa_contribution(mol, i);
  }
  p.hba = count_hba(mol);
  p.hbd = count_hbd(mol);
  p.rotb = count_rotatable_bonds(mol);
  p.arom = count_aromatic_rings(mol);
  p.alerts = static_cast<int>(alerts_.hits(mol).size());
  return p;
}

double DescriptorSet::qed(const PropertyVector& props, bool weighted) const {
  const double x[8] = {props.mw,
                       props.alogp,
                       static_cast<double>(props.hba),
                       static_cast<double>(props.hbd),
                       props.psa,
                       static_cast<double>(props.rotb),
                       static_cast<double>(props.arom),
                       static_cast<double>(props.alerts)};
  double num = 0, den = 0;
  for (int k = 0; k < 8; ++k) {
    const AdsParams& p = qed_[k];
    double d = std::clamp(p(x[k]) / p.dmax, 1e-9, 1.0);
    double w = weighted ? p.weight : 1.0;
    num += w * std::log(d);
    den += w;
  }
  return std::exp(num / den);
}

double DescriptorSet::qed(const MolGraph& mol, bool weighted) const {
  return qed(compute_properties(mol), weighted);
}

double DescriptorSet::sa_score(const MolGraph& mol) const {
  size_t n = mol.num_atoms();
  if (n == 0) return 1.0;

  // ECFP4-style fragment set: environments of every radius up to 2.
  std::vector<uint64_t> envs;
  for (int radius = 0; radius <= 2; ++radius) {
    auto level = fp::morgan_environments(mol, radius);
    envs.insert(envs.end(), level.begin(), level.end());
  }
  double frag = 0;
  std::set<uint64_t> unique(envs.begin(), envs.end());
  for (uint64_t e : envs) {
    auto it = sa_fragments_.find(e);
    frag += (it == sa_fragments_.end()) ? sa_missing_ : it->second;
  }
  double score1 = frag / static_cast<double>(envs.size());

  RingComplexity rc = ring_complexity(mol);
  double size_penalty = std::pow(static_cast<double>(n), 1.005) - static_cast<double>(n);
  double spiro_penalty = std::log10(rc.n_spiro + 1.0);
  double bridge_penalty = std::log10(rc.n_bridgehead + 1.0);
  double macro_penalty = rc.macrocycle ? std::log10(2.0) : 0.0;
  double score2 = -(size_penalty + spiro_penalty + bridge_penalty + macro_penalty);

  double score3 = 0.0;
  if (n > unique.size()) score3 = 0.5 * std::log(static_cast<double>(n) / unique.size());

  double raw = score1 + score2 + score3;
  constexpr double kMin = -4.0, kMax = 2.5;
  double sa = 11.0 - (raw - kMin + 1.0) / (kMax - kMin) * 9.0;
  if (sa > 8.0) sa = 8.0 + std::log(sa + 1.0 - 9.0);
  return std::clamp(sa, 1.0, 10.0);
}

}  // namespace mtgen::desc
