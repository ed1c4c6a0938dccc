#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include "mtgen/chem/smiles.hpp"

namespace mtgen::chem {

std::string_view to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::None: return "none";
    case ParseErrorKind::Syntax: return "syntax";
    case ParseErrorKind::UnclosedRing: return "unclosed_ring";
    case ParseErrorKind::Valence: return "valence";
    case ParseErrorKind::UnsupportedFeature: return "unsupported_feature";
  }
  return "none";
}

namespace {

// Two-letter symbols recognized so that e.g. [Si] reads as one unsupported
// element instead of a confusing syntax error at 'i'.
constexpr std::string_view kTwoLetter[] = {
    "He", "Li", "Be", "Ne", "Na", "Mg", "Al", "Si", "Ar", "Ca", "Sc", "Ti",
    "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br",
    "Kr", "Rb", "Sr", "Zr", "Ag", "Cd", "In", "Sn", "Sb", "Te", "Xe", "Cs",
    "Ba", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Cl"};

bool known_two_letter(std::string_view s) {
  for (auto t : kTwoLetter)
    if (t == s) return true;
  return false;
}

struct Parser {
  std::string_view s;
  size_t pos = 0;
  MolGraph mol;
  std::vector<size_t> atom_pos;  // source offset per atom

  struct RingOpen {
    uint32_t atom;
    BondOrder order;
    bool order_set;
    bool aromatic_written;
    size_t pos;
  };
  std::map<int, RingOpen> ring_open;
  std::vector<std::pair<uint32_t, size_t>> branch_stack;  // (saved prev, '(' offset)
  int32_t prev = -1;
  BondOrder pending = BondOrder::Single;
  bool pending_set = false;
  bool pending_aromatic_written = false;

  ParseDiagnostics diag;

  bool fail(ParseErrorKind kind, size_t at, std::string msg) {
    diag = {kind, at, std::move(msg)};
    return false;
  }

  bool done() const { return pos >= s.size(); }
  char peek() const { return s[pos]; }

  uint32_t add_atom(uint8_t z, int8_t charge, uint8_t explicit_h, bool aromatic, bool bracket,
                    size_t at) {
    Atom a;
    a.atomic_number = z;
    a.formal_charge = charge;
    a.explicit_h = explicit_h;
    a.aromatic = aromatic;
    a.bracket = bracket;
    mol.atoms.push_back(a);
    atom_pos.push_back(at);
    return static_cast<uint32_t>(mol.atoms.size() - 1);
  }

  bool link(uint32_t from, uint32_t to, BondOrder order, bool arom_written, size_t at) {
    if (from == to) return fail(ParseErrorKind::Syntax, at, "ring closure bonds an atom to itself");
    for (const Bond& b : mol.bonds)
      if ((b.a == from && b.b == to) || (b.a == to && b.b == from))
        return fail(ParseErrorKind::Syntax, at, "duplicate bond between the same atoms");
    Bond b;
    b.a = from;
    b.b = to;
    b.order = order;
    b.aromatic_written = arom_written;
    mol.bonds.push_back(b);
    return true;
  }

  // Bond order between `prev` and a new atom/ring partner when nothing was
  // written: aromatic if both ends were written aromatic, else single.
  BondOrder default_order(uint32_t a, uint32_t b) const {
    return (mol.atoms[a].aromatic && mol.atoms[b].aromatic) ? BondOrder::Aromatic
                                                            : BondOrder::Single;
  }

  bool commit_atom(uint32_t idx, size_t at) {
    if (prev >= 0) {
      BondOrder order =
          pending_set ? pending : default_order(static_cast<uint32_t>(prev), idx);
      if (!link(static_cast<uint32_t>(prev), idx, order, pending_aromatic_written, at))
        return false;
    }
    pending_set = false;
    pending_aromatic_written = false;
    prev = static_cast<int32_t>(idx);
    return true;
  }

  bool ring_closure(int number, size_t at) {
    if (prev < 0)
      return fail(ParseErrorKind::Syntax, at, "ring closure digit before any atom");
    auto it = ring_open.find(number);
    if (it == ring_open.end()) {
      ring_open[number] = {static_cast<uint32_t>(prev), pending, pending_set,
                           pending_aromatic_written, at};
      pending_set = false;
      pending_aromatic_written = false;
      return true;
    }
    RingOpen open = it->second;
    ring_open.erase(it);
    BondOrder order;
    bool arom_written = open.aromatic_written || pending_aromatic_written;
    if (open.order_set && pending_set && open.order != pending)
      return fail(ParseErrorKind::Syntax, at, "ring bond order written differently at both ends");
    if (open.order_set)
      order = open.order;
    else if (pending_set)
      order = pending;
    else
      order = default_order(open.atom, static_cast<uint32_t>(prev));
    pending_set = false;
    pending_aromatic_written = false;
    return link(open.atom, static_cast<uint32_t>(prev), order, arom_written, at);
  }

  bool bare_atom() {
    size_t at = pos;
    char c = s[pos];
    uint8_t z = 0;
    bool aromatic = false;
    if (pos + 1 < s.size() &&
        ((c == 'C' && s[pos + 1] == 'l') || (c == 'B' && s[pos + 1] == 'r'))) {
      z = (c == 'C') ? 17 : 35;
      pos += 2;
    } else {
      switch (c) {
        case 'B': z = 5; break;
        case 'C': z = 6; break;
        case 'N': z = 7; break;
        case 'O': z = 8; break;
        case 'P': z = 15; break;
        case 'S': z = 16; break;
        case 'F': z = 9; break;
        case 'I': z = 53; break;
        case 'b': z = 5; aromatic = true; break;
        case 'c': z = 6; aromatic = true; break;
        case 'n': z = 7; aromatic = true; break;
        case 'o': z = 8; aromatic = true; break;
        case 'p': z = 15; aromatic = true; break;
        case 's': z = 16; aromatic = true; break;
        default: return fail(ParseErrorKind::Syntax, at, "unexpected character");
      }
      ++pos;
    }
    uint32_t idx = add_atom(z, 0, 0, aromatic, false, at);
    return commit_atom(idx, at);
  }

  bool bracket_atom() {
    size_t open_at = pos;
    ++pos;  // '['
    if (done()) return fail(ParseErrorKind::Syntax, open_at, "unterminated bracket atom");

    if (std::isdigit(static_cast<unsigned char>(peek())))
      return fail(ParseErrorKind::UnsupportedFeature, pos, "isotopes are not supported");
    if (peek() == '*')
      return fail(ParseErrorKind::UnsupportedFeature, pos, "wildcard atoms are not supported");

    size_t sym_at = pos;
    std::string sym;
    char c = peek();
    if (std::isupper(static_cast<unsigned char>(c))) {
      sym += c;
      ++pos;
      if (!done() && std::islower(static_cast<unsigned char>(peek()))) {
        std::string two = sym + peek();
        if (known_two_letter(two)) {
          sym = two;
          ++pos;
        }
      }
    } else if (std::islower(static_cast<unsigned char>(c))) {
      sym += c;
      ++pos;
      // lowercase two-letter aromatic symbols (se, as, te) are real SMILES but
      // outside the supported set
      if (!done() && std::islower(static_cast<unsigned char>(peek()))) {
        std::string two = sym + peek();
        if (two == "se" || two == "as" || two == "te")
          return fail(ParseErrorKind::UnsupportedFeature, sym_at,
                      "element '" + two + "' is not supported");
      }
    } else {
      return fail(ParseErrorKind::Syntax, pos, "expected an element symbol");
    }

    bool aromatic = std::islower(static_cast<unsigned char>(sym[0]));
    std::string upper = sym;
    upper[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(upper[0])));
    if (upper == "H")
      return fail(ParseErrorKind::UnsupportedFeature, sym_at,
                  "explicit hydrogen atoms are not supported");
    int z = atomic_number_of(upper);
    if (z <= 0)
      return fail(ParseErrorKind::UnsupportedFeature, sym_at,
                  "element '" + sym + "' is not supported");
    if (aromatic && !element_can_be_aromatic(static_cast<uint8_t>(z)))
      return fail(ParseErrorKind::Valence, sym_at, sym + " cannot be aromatic");

    uint8_t explicit_h = 0;
    int charge = 0;
    while (!done() && peek() != ']') {
      char k = peek();
      if (k == '@')
        return fail(ParseErrorKind::UnsupportedFeature, pos, "stereochemistry is not supported");
      if (k == ':')
        return fail(ParseErrorKind::UnsupportedFeature, pos, "atom maps are not supported");
      if (k == 'H') {
        ++pos;
        int n = 1;
        if (!done() && std::isdigit(static_cast<unsigned char>(peek()))) {
          n = peek() - '0';
          ++pos;
        }
        explicit_h = static_cast<uint8_t>(n);
        continue;
      }
      if (k == '+' || k == '-') {
        int sign = (k == '+') ? 1 : -1;
        int n = 1;
        ++pos;
        if (!done() && std::isdigit(static_cast<unsigned char>(peek()))) {
          n = peek() - '0';
          ++pos;
        } else {
          while (!done() && peek() == k) {
            ++n;
            ++pos;
          }
        }
        charge = sign * n;
        continue;
      }
      return fail(ParseErrorKind::Syntax, pos, "unexpected character in bracket atom");
    }
    if (done()) return fail(ParseErrorKind::Syntax, open_at, "unterminated bracket atom");
    ++pos;  // ']'

    uint32_t idx = add_atom(static_cast<uint8_t>(z), static_cast<int8_t>(charge), explicit_h,
                            aromatic, true, sym_at);
    return commit_atom(idx, open_at);
  }

  bool set_pending(BondOrder order, bool arom_written) {
    if (pending_set) return fail(ParseErrorKind::Syntax, pos, "two bond symbols in a row");
    if (prev < 0) return fail(ParseErrorKind::Syntax, pos, "bond symbol before any atom");
    pending = order;
    pending_set = true;
    pending_aromatic_written = arom_written;
    ++pos;
    return true;
  }

  bool run() {
    if (s.empty()) return fail(ParseErrorKind::Syntax, 0, "empty SMILES");
    while (!done()) {
      char c = peek();
      if (std::isdigit(static_cast<unsigned char>(c))) {
        if (!ring_closure(c - '0', pos)) return false;
        ++pos;
      } else if (c == '%') {
        size_t at = pos;
        if (pos + 2 >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos + 1])) ||
            !std::isdigit(static_cast<unsigned char>(s[pos + 2])))
          return fail(ParseErrorKind::Syntax, at, "'%' needs two digits");
        int number = (s[pos + 1] - '0') * 10 + (s[pos + 2] - '0');
        if (!ring_closure(number, at)) return false;
        pos += 3;
      } else if (c == '(') {
        if (prev < 0) return fail(ParseErrorKind::Syntax, pos, "branch before any atom");
        if (pending_set) return fail(ParseErrorKind::Syntax, pos, "bond symbol before '('");
        branch_stack.emplace_back(static_cast<uint32_t>(prev), pos);
        ++pos;
      } else if (c == ')') {
        if (branch_stack.empty()) return fail(ParseErrorKind::Syntax, pos, "unmatched ')'");
        if (pending_set)
          return fail(ParseErrorKind::Syntax, pos, "bond symbol without a following atom");
        prev = static_cast<int32_t>(branch_stack.back().first);
        branch_stack.pop_back();
        ++pos;
      } else if (c == '-') {
        if (!set_pending(BondOrder::Single, false)) return false;
      } else if (c == '=') {
        if (!set_pending(BondOrder::Double, false)) return false;
      } else if (c == '#') {
        if (!set_pending(BondOrder::Triple, false)) return false;
      } else if (c == ':') {
        if (!set_pending(BondOrder::Aromatic, true)) return false;
      } else if (c == '/' || c == '\\') {
        return fail(ParseErrorKind::UnsupportedFeature, pos, "stereochemistry is not supported");
      } else if (c == '@') {
        return fail(ParseErrorKind::UnsupportedFeature, pos, "stereochemistry is not supported");
      } else if (c == '.') {
        if (pending_set)
          return fail(ParseErrorKind::Syntax, pos, "bond symbol before fragment separator");
        prev = -1;
        ++pos;
      } else if (c == '[') {
        if (!bracket_atom()) return false;
      } else {
        if (!bare_atom()) return false;
      }
    }

    if (pending_set)
      return fail(ParseErrorKind::Syntax, s.size(), "bond symbol without a following atom");
    if (!branch_stack.empty())
      return fail(ParseErrorKind::Syntax, branch_stack.back().second, "unclosed branch");
    if (!ring_open.empty()) {
      size_t first = std::string::npos;
      for (const auto& [num, open] : ring_open) first = std::min(first, open.pos);
      return fail(ParseErrorKind::UnclosedRing, first, "unclosed ring bond");
    }
    if (mol.atoms.empty()) return fail(ParseErrorKind::Syntax, 0, "empty SMILES");
    return true;
  }
};

}  // namespace

ParseResult parse_smiles(std::string_view smiles) {
  Parser p;
  p.s = smiles;
  ParseResult out;
  if (!p.run()) {
    out.diag = p.diag;
    return out;
  }
  if (auto err = p.mol.finalize()) {
    out.diag.kind = ParseErrorKind::Valence;
    out.diag.message = err->message;
    out.diag.position =
        (err->atom >= 0 && err->atom < static_cast<int32_t>(p.atom_pos.size()))
            ? p.atom_pos[err->atom]
            : 0;
    return out;
  }
  out.mol = std::move(p.mol);
  return out;
}

std::optional<std::string> canonical_smiles(std::string_view smiles) {
  ParseResult r = parse_smiles(smiles);
  if (!r.ok()) return std::nullopt;
  return canonical_smiles(*r.mol);
}

std::vector<SmilesRecord> read_smiles_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<SmilesRecord> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    // full-line comments only: '#' is a bond symbol inside SMILES
    if (line[start] == '#') continue;
    SmilesRecord rec;
    rec.line_no = line_no;
    size_t tab = line.find_first_of(" \t", start);
    if (tab == std::string::npos) {
      rec.smiles = line.substr(start);
    } else {
      rec.smiles = line.substr(start, tab - start);
      size_t id_start = line.find_first_not_of(" \t", tab);
      if (id_start != std::string::npos) rec.id = line.substr(id_start);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void write_smiles_file(const std::string& path, const std::vector<SmilesRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& rec : records) {
    out << rec.smiles;
    if (!rec.id.empty()) out << '\t' << rec.id;
    out << '\n';
  }
}

}  // namespace mtgen::chem
