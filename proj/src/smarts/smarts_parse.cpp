#include <cctype>
#include <map>

#include "mtgen/smarts/smarts.hpp"

namespace mtgen::smarts {

namespace {

struct Parser {
  std::string_view s;
  size_t pos = 0;
  SmartsQuery q;
  size_t err_pos = 0;
  std::string err;

  struct RingOpen {
    uint32_t atom;
    BondExpr expr;
    size_t pos;
  };
  std::map<int, RingOpen> ring_open;
  std::vector<std::pair<uint32_t, size_t>> branch_stack;
  int32_t prev = -1;
  BondExpr pending = BondExpr::Default;
  bool pending_set = false;

  bool fail(size_t at, std::string msg) {
    err_pos = at;
    err = std::move(msg);
    return false;
  }

  bool done() const { return pos >= s.size(); }
  char peek() const { return s[pos]; }

  int32_t add_node(AtomNode n) {
    q.nodes.push_back(n);
    return static_cast<int32_t>(q.nodes.size() - 1);
  }

  int32_t prim(AtomNode::Prim p, int value = 0) {
    AtomNode n;
    n.op = AtomNode::Op::Prim;
    n.prim = p;
    n.value = static_cast<int16_t>(value);
    return add_node(n);
  }

  int32_t combine(AtomNode::Op op, int32_t lhs, int32_t rhs) {
    AtomNode n;
    n.op = op;
    n.lhs = lhs;
    n.rhs = rhs;
    return add_node(n);
  }

  int read_digits(int fallback) {
    if (done() || !std::isdigit(static_cast<unsigned char>(peek()))) return fallback;
    int v = 0;
    while (!done() && std::isdigit(static_cast<unsigned char>(peek()))) {
      v = v * 10 + (peek() - '0');
      ++pos;
    }
    return v;
  }

  // element symbol starting at `pos`, or 0; advances on success
  int read_element() {
    if (done()) return 0;
    char c = peek();
    if (pos + 1 < s.size() && ((c == 'C' && s[pos + 1] == 'l') || (c == 'B' && s[pos + 1] == 'r'))) {
      pos += 2;
      return c == 'C' ? 17 : 35;
    }
    int z = 0;
    switch (c) {
      case 'B': z = 5; break;
      case 'C': z = 6; break;
      case 'N': z = 7; break;
      case 'O': z = 8; break;
      case 'P': z = 15; break;
      case 'S': z = 16; break;
      case 'F': z = 9; break;
      case 'I': z = 53; break;
      default: return 0;
    }
    ++pos;
    return z;
  }

  int read_aromatic_element() {
    if (done()) return 0;
    int z = 0;
    switch (peek()) {
      case 'b': z = 5; break;
      case 'c': z = 6; break;
      case 'n': z = 7; break;
      case 'o': z = 8; break;
      case 'p': z = 15; break;
      case 's': z = 16; break;
      default: return 0;
    }
    ++pos;
    return z;
  }

  // --- bracket expression, precedence ! > & (implicit) > , > ; -------------

  int32_t parse_prim() {
    if (done()) {
      fail(pos, "unterminated atom expression");
      return -1;
    }
    size_t at = pos;
    char c = peek();
    if (c == '*') {
      ++pos;
      return prim(AtomNode::Prim::Any);
    }
    if (c == '#') {
      ++pos;
      if (done() || !std::isdigit(static_cast<unsigned char>(peek()))) {
        fail(at, "'#' needs an atomic number");
        return -1;
      }
      return prim(AtomNode::Prim::Element, read_digits(0));
    }
    if (c == 'a') {
      ++pos;
      return prim(AtomNode::Prim::Aromatic);
    }
    if (c == 'A') {
      ++pos;
      return prim(AtomNode::Prim::Aliphatic);
    }
    if (c == 'D') {
      ++pos;
      return prim(AtomNode::Prim::Degree, read_digits(1));
    }
    if (c == 'H') {
      ++pos;
      return prim(AtomNode::Prim::TotalH, read_digits(1));
    }
    if (c == 'X') {
      ++pos;
      return prim(AtomNode::Prim::Connectivity, read_digits(1));
    }
    if (c == 'R') {
      ++pos;
      int v = read_digits(-1);
      if (v < 0) return prim(AtomNode::Prim::RingMember);
      return prim(AtomNode::Prim::RingCount, v);
    }
    if (c == '+' || c == '-') {
      int sign = (c == '+') ? 1 : -1;
      ++pos;
      int n = read_digits(-1);
      if (n < 0) {
        n = 1;
        while (!done() && peek() == c) {
          ++n;
          ++pos;
        }
      }
      return prim(AtomNode::Prim::Charge, sign * n);
    }
    if (std::isupper(static_cast<unsigned char>(c))) {
      int z = read_element();
      if (z == 0) {
        fail(at, "unknown element in atom expression");
        return -1;
      }
      return prim(AtomNode::Prim::ElementAliphatic, z);
    }
    if (std::islower(static_cast<unsigned char>(c))) {
      int z = read_aromatic_element();
      if (z == 0) {
        fail(at, "unknown aromatic element in atom expression");
        return -1;
      }
      return prim(AtomNode::Prim::ElementAromatic, z);
    }
    if (c == '$') {
      fail(at, "unsupported primitive '$' (recursive SMARTS)");
      return -1;
    }
    if (c == '@') {
      fail(at, "unsupported primitive '@' (chirality)");
      return -1;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      fail(at, "unsupported primitive: isotope specification");
      return -1;
    }
    fail(at, "unexpected character in atom expression");
    return -1;
  }

  int32_t parse_unary() {
    if (!done() && peek() == '!') {
      size_t at = pos;
      ++pos;
      int32_t inner = parse_unary();
      if (inner < 0) return -1;
      AtomNode n;
      n.op = AtomNode::Op::Not;
      n.lhs = inner;
      (void)at;
      return add_node(n);
    }
    return parse_prim();
  }

  bool starts_unary() const {
    if (done()) return false;
    char c = peek();
    // '$', '@' and leading digits (isotopes) start primitives too — they are
    // routed into parse_prim so it can emit the named unsupported errors.
    return c == '!' || c == '*' || c == '#' || c == '+' || c == '-' || c == '$' || c == '@' ||
           std::isalpha(static_cast<unsigned char>(c)) ||
           std::isdigit(static_cast<unsigned char>(c));
  }

  int32_t parse_and_high() {
    int32_t lhs = parse_unary();
    if (lhs < 0) return -1;
    while (!done() && (peek() == '&' || starts_unary())) {
      if (peek() == '&') ++pos;
      int32_t rhs = parse_unary();
      if (rhs < 0) return -1;
      lhs = combine(AtomNode::Op::And, lhs, rhs);
    }
    return lhs;
  }

  int32_t parse_or() {
    int32_t lhs = parse_and_high();
    if (lhs < 0) return -1;
    while (!done() && peek() == ',') {
      ++pos;
      int32_t rhs = parse_and_high();
      if (rhs < 0) return -1;
      lhs = combine(AtomNode::Op::Or, lhs, rhs);
    }
    return lhs;
  }

  int32_t parse_expr() {
    int32_t lhs = parse_or();
    if (lhs < 0) return -1;
    while (!done() && peek() == ';') {
      ++pos;
      int32_t rhs = parse_or();
      if (rhs < 0) return -1;
      lhs = combine(AtomNode::Op::And, lhs, rhs);
    }
    return lhs;
  }

  // --- structural level ------------------------------------------------------

  uint32_t add_atom(int32_t root) {
    q.roots.push_back(root);
    return static_cast<uint32_t>(q.roots.size() - 1);
  }

  bool link(uint32_t from, uint32_t to, BondExpr expr, size_t at) {
    if (from == to) return fail(at, "ring closure bonds an atom to itself");
    for (const QueryBond& b : q.bonds)
      if ((b.a == from && b.b == to) || (b.a == to && b.b == from))
        return fail(at, "duplicate bond between the same atoms");
    q.bonds.push_back({from, to, expr});
    return true;
  }

  bool commit_atom(uint32_t idx, size_t at) {
    if (prev >= 0) {
      BondExpr e = pending_set ? pending : BondExpr::Default;
      if (!link(static_cast<uint32_t>(prev), idx, e, at)) return false;
    }
    pending_set = false;
    prev = static_cast<int32_t>(idx);
    return true;
  }

  bool ring_closure(int number, size_t at) {
    if (prev < 0) return fail(at, "ring closure digit before any atom");
    auto it = ring_open.find(number);
    if (it == ring_open.end()) {
      ring_open[number] = {static_cast<uint32_t>(prev), pending_set ? pending : BondExpr::Default,
                           at};
      pending_set = false;
      return true;
    }
    RingOpen open = it->second;
    ring_open.erase(it);
    BondExpr e = BondExpr::Default;
    if (open.expr != BondExpr::Default) e = open.expr;
    if (pending_set) {
      if (open.expr != BondExpr::Default && open.expr != pending)
        return fail(at, "ring bond written differently at both ends");
      e = pending;
    }
    pending_set = false;
    return link(open.atom, static_cast<uint32_t>(prev), e, at);
  }

  bool set_pending(BondExpr e) {
    if (pending_set) return fail(pos, "two bond symbols in a row");
    if (prev < 0) return fail(pos, "bond symbol before any atom");
    pending = e;
    pending_set = true;
    ++pos;
    return true;
  }

  bool bare_atom() {
    size_t at = pos;
    char c = peek();
    if (c == '*') {
      ++pos;
      return commit_atom(add_atom(prim(AtomNode::Prim::Any)), at);
    }
    if (c == 'a') {
      ++pos;
      return commit_atom(add_atom(prim(AtomNode::Prim::Aromatic)), at);
    }
    if (c == 'A') {
      ++pos;
      return commit_atom(add_atom(prim(AtomNode::Prim::Aliphatic)), at);
    }
    if (int z = read_element(); z != 0)
      return commit_atom(add_atom(prim(AtomNode::Prim::ElementAliphatic, z)), at);
    if (int z = read_aromatic_element(); z != 0)
      return commit_atom(add_atom(prim(AtomNode::Prim::ElementAromatic, z)), at);
    return fail(at, "unexpected character");
  }

  bool bracket_atom() {
    size_t at = pos;
    ++pos;  // '['
    int32_t root = parse_expr();
    if (root < 0) return false;
    if (done() || peek() != ']') return fail(at, "unterminated atom expression");
    ++pos;
    return commit_atom(add_atom(root), at);
  }

  bool run() {
    if (s.empty()) return fail(0, "empty pattern");
    while (!done()) {
      char c = peek();
      if (std::isdigit(static_cast<unsigned char>(c))) {
        if (!ring_closure(c - '0', pos)) return false;
        ++pos;
      } else if (c == '%') {
        size_t at = pos;
        if (pos + 2 >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos + 1])) ||
            !std::isdigit(static_cast<unsigned char>(s[pos + 2])))
          return fail(at, "'%' needs two digits");
        if (!ring_closure((s[pos + 1] - '0') * 10 + (s[pos + 2] - '0'), at)) return false;
        pos += 3;
      } else if (c == '(') {
        if (prev < 0) return fail(pos, "branch before any atom");
        if (pending_set) return fail(pos, "bond symbol before '('");
        branch_stack.emplace_back(static_cast<uint32_t>(prev), pos);
        ++pos;
      } else if (c == ')') {
        if (branch_stack.empty()) return fail(pos, "unmatched ')'");
        if (pending_set) return fail(pos, "bond symbol without a following atom");
        prev = static_cast<int32_t>(branch_stack.back().first);
        branch_stack.pop_back();
        ++pos;
      } else if (c == '-') {
        if (!set_pending(BondExpr::Single)) return false;
      } else if (c == '=') {
        if (!set_pending(BondExpr::Double)) return false;
      } else if (c == '#') {
        if (!set_pending(BondExpr::Triple)) return false;
      } else if (c == ':') {
        if (!set_pending(BondExpr::Aromatic)) return false;
      } else if (c == '~') {
        if (!set_pending(BondExpr::Any)) return false;
      } else if (c == '.') {
        return fail(pos, "queries must be a single connected fragment");
      } else if (c == '[') {
        if (!bracket_atom()) return false;
      } else {
        if (!bare_atom()) return false;
      }
    }
    if (pending_set) return fail(s.size(), "bond symbol without a following atom");
    if (!branch_stack.empty()) return fail(branch_stack.back().second, "unclosed branch");
    if (!ring_open.empty()) {
      size_t first = std::string::npos;
      for (const auto& [num, open] : ring_open) first = std::min(first, open.pos);
      return fail(first, "unclosed ring bond");
    }
    if (q.roots.empty()) return fail(0, "empty pattern");

    // connectivity: BFS over query bonds
    q.adj.assign(q.num_atoms(), {});
    for (uint32_t bi = 0; bi < q.bonds.size(); ++bi) {
      q.adj[q.bonds[bi].a].push_back(bi);
      q.adj[q.bonds[bi].b].push_back(bi);
    }
    std::vector<bool> seen(q.num_atoms(), false);
    std::vector<uint32_t> stack{0};
    seen[0] = true;
    size_t reached = 1;
    while (!stack.empty()) {
      uint32_t u = stack.back();
      stack.pop_back();
      for (uint32_t bi : q.adj[u]) {
        uint32_t v = q.bonds[bi].other(u);
        if (!seen[v]) {
          seen[v] = true;
          ++reached;
          stack.push_back(v);
        }
      }
    }
    if (reached != q.num_atoms()) return fail(0, "queries must be a single connected fragment");
    return true;
  }
};

}  // namespace

SmartsParseResult parse_smarts(std::string_view pattern) {
  Parser p;
  p.s = pattern;
  SmartsParseResult out;
  if (!p.run()) {
    out.position = p.err_pos;
    out.error = p.err;
    return out;
  }
  p.q.text = std::string(pattern);
  out.query = std::move(p.q);
  return out;
}

}  // namespace mtgen::smarts
