#include <fstream>
#include <stdexcept>

#include "mtgen/smarts/smarts.hpp"

namespace mtgen::smarts {

using chem::BondOrder;
using chem::MolGraph;

namespace {

bool eval_node(const SmartsQuery& q, int32_t idx, const MolGraph& mol, uint32_t atom) {
  const AtomNode& n = q.nodes[idx];
  switch (n.op) {
    case AtomNode::Op::Not: return !eval_node(q, n.lhs, mol, atom);
    case AtomNode::Op::And: return eval_node(q, n.lhs, mol, atom) && eval_node(q, n.rhs, mol, atom);
    case AtomNode::Op::Or: return eval_node(q, n.lhs, mol, atom) || eval_node(q, n.rhs, mol, atom);
    case AtomNode::Op::Prim: break;
  }
  const chem::Atom& a = mol.atoms[atom];
  switch (n.prim) {
    case AtomNode::Prim::Any: return true;
    case AtomNode::Prim::Element: return a.atomic_number == n.value;
    case AtomNode::Prim::ElementAliphatic: return a.atomic_number == n.value && !a.aromatic;
    case AtomNode::Prim::ElementAromatic: return a.atomic_number == n.value && a.aromatic;
    case AtomNode::Prim::Aromatic: return a.aromatic;
    case AtomNode::Prim::Aliphatic: return !a.aromatic;
    case AtomNode::Prim::Charge: return a.formal_charge == n.value;
    case AtomNode::Prim::Degree: return mol.degree(atom) == n.value;
    case AtomNode::Prim::TotalH: return a.total_h() == n.value;
    case AtomNode::Prim::Connectivity: return mol.degree(atom) + a.total_h() == n.value;
    case AtomNode::Prim::RingMember: return mol.in_ring(atom);
    case AtomNode::Prim::RingCount: return mol.ring_count(atom) == n.value;
  }
  return false;
}

}  // namespace

bool atom_matches(const SmartsQuery& q, uint32_t query_atom, const MolGraph& mol, uint32_t atom) {
  return eval_node(q, q.roots[query_atom], mol, atom);
}

bool bond_matches(BondExpr expr, BondOrder order) {
  switch (expr) {
    case BondExpr::Default: return order == BondOrder::Single || order == BondOrder::Aromatic;
    case BondExpr::Single: return order == BondOrder::Single;
    case BondExpr::Double: return order == BondOrder::Double;
    case BondExpr::Triple: return order == BondOrder::Triple;
    case BondExpr::Aromatic: return order == BondOrder::Aromatic;
    case BondExpr::Any: return true;
  }
  return false;
}

std::vector<std::vector<uint32_t>> find_matches(const SmartsQuery& q, const MolGraph& mol,
                                                size_t max_matches) {
  std::vector<std::vector<uint32_t>> out;
  size_t nq = q.num_atoms();
  size_t nt = mol.num_atoms();
  if (nq == 0 || nq > nt) return out;

  // search order: BFS from query atom 0; each later atom anchors on an
  // already-placed neighbor so candidates stay local
  std::vector<uint32_t> order;
  std::vector<int32_t> anchor(nq, -1);  // query atom we hang off
  {
    std::vector<bool> seen(nq, false);
    std::vector<uint32_t> queue{0};
    seen[0] = true;
    for (size_t head = 0; head < queue.size(); ++head) {
      uint32_t u = queue[head];
      order.push_back(u);
      for (uint32_t bi : q.adj[u]) {
        uint32_t v = q.bonds[bi].other(u);
        if (!seen[v]) {
          seen[v] = true;
          anchor[v] = static_cast<int32_t>(u);
          queue.push_back(v);
        }
      }
    }
  }

  std::vector<uint32_t> map_q2t(nq, UINT32_MAX);
  std::vector<bool> used(nt, false);

  auto bonds_consistent = [&](uint32_t qa, uint32_t ta) {
    for (uint32_t bi : q.adj[qa]) {
      const QueryBond& qb = q.bonds[bi];
      uint32_t qn = qb.other(qa);
      if (map_q2t[qn] == UINT32_MAX) continue;
      const chem::Bond* tb = mol.bond_between(ta, map_q2t[qn]);
      if (!tb || !bond_matches(qb.expr, tb->order)) return false;
    }
    return true;
  };

  struct Step {
    size_t k;
    std::vector<uint32_t> candidates;
    size_t next = 0;
  };

  // iterative backtracking keeps huge fuzz molecules safe
  std::vector<Step> stack;
  auto candidates_for = [&](size_t k) {
    std::vector<uint32_t> c;
    uint32_t qa = order[k];
    if (anchor[qa] >= 0) {
      uint32_t t_anchor = map_q2t[static_cast<uint32_t>(anchor[qa])];
      for (uint32_t bi : mol.bonds_of(t_anchor)) c.push_back(mol.bonds[bi].other(t_anchor));
    } else {
      c.resize(nt);
      for (uint32_t i = 0; i < nt; ++i) c[i] = i;
    }
    return c;
  };
  stack.push_back({0, candidates_for(0), 0});

  while (!stack.empty()) {
    Step& st = stack.back();
    uint32_t qa = order[st.k];
    bool advanced = false;
    while (st.next < st.candidates.size()) {
      uint32_t ta = st.candidates[st.next++];
      if (used[ta] || !atom_matches(q, qa, mol, ta) || !bonds_consistent(qa, ta)) continue;
      map_q2t[qa] = ta;
      used[ta] = true;
      if (st.k + 1 == nq) {
        out.push_back(map_q2t);
        used[ta] = false;
        map_q2t[qa] = UINT32_MAX;
        if (max_matches && out.size() >= max_matches) return out;
        continue;
      }
      stack.push_back({st.k + 1, candidates_for(st.k + 1), 0});
      advanced = true;
      break;
    }
    if (!advanced) {
      stack.pop_back();
      if (!stack.empty()) {
        uint32_t prev_qa = order[stack.back().k];
        used[map_q2t[prev_qa]] = false;
        map_q2t[prev_qa] = UINT32_MAX;
      }
    }
  }
  return out;
}

bool has_match(const SmartsQuery& q, const MolGraph& mol) {
  return !find_matches(q, mol, 1).empty();
}

std::vector<CatalogueEntry> load_catalogue(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<CatalogueEntry> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    size_t t1 = line.find('\t', start);
    size_t t2 = (t1 == std::string::npos) ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected pattern_id<TAB>SMARTS<TAB>family");
    CatalogueEntry e;
    e.pattern_id = line.substr(start, t1 - start);
    e.smarts = line.substr(t1 + 1, t2 - t1 - 1);
    e.family = line.substr(t2 + 1);
    SmartsParseResult r = parse_smarts(e.smarts);
    if (!r.ok())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad pattern '" +
                               e.smarts + "': " + r.error);
    e.query = std::move(*r.query);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<std::string> SmartsFilter::hits(const MolGraph& mol) const {
  std::vector<std::string> out;
  for (const CatalogueEntry& e : entries_)
    if (has_match(e.query, mol)) out.push_back(e.pattern_id);
  return out;
}

bool SmartsFilter::passes(const MolGraph& mol) const {
  for (const CatalogueEntry& e : entries_)
    if (has_match(e.query, mol)) return false;
  return true;
}

Catalogue load_named_catalogue(const std::string& path, const std::string& name) {
  return Catalogue{name, load_catalogue(path)};
}

ScreenReport screen(const MolGraph& mol, const std::vector<Catalogue>& catalogues) {
  ScreenReport report;
  for (const Catalogue& cat : catalogues)
    for (const CatalogueEntry& e : cat.patterns)
      if (has_match(e.query, mol)) report.hits.push_back({cat.name, e.pattern_id});
  report.pass = report.hits.empty();
  return report;
}

}  // namespace mtgen::smarts
