#!/usr/bin/env python3
"""Independent reference implementation of the descriptor stack.

A from-scratch Python implementation of the supported SMILES subset, ring and
aromaticity perception, the property vector, QED, Morgan environment ids and
the SA score. It shares nothing with the C++ code except the parameter TSV
files and the documented environment-id recipe (initial invariant fields +
splitmix64 mixing), which is a stable on-disk contract. Used to generate the
SA fragment-frequency table and the descriptor panel fixture, and to
cross-check the C++ implementation against an independent route.

Modes:
  gen-sa    <corpus.smi> <out.tsv>
  gen-panel <panel.smi> <data_dir> <out.tsv>
  check     <data_dir> <SMILES...>
"""

import math
import sys
from collections import Counter

M64 = (1 << 64) - 1

# symbol -> (z, mass, allowed valences, can be aromatic)
ELEMENTS = {
    "B": (5, 10.811, (3,), True),
    "C": (6, 12.011, (4,), True),
    "N": (7, 14.007, (3,), True),
    "O": (8, 15.999, (2,), True),
    "F": (9, 18.998, (1,), False),
    "P": (15, 30.974, (3, 5), True),
    "S": (16, 32.06, (2, 4, 6), True),
    "Cl": (17, 35.453, (1,), False),
    "Br": (35, 79.904, (1,), False),
    "I": (53, 126.904, (1,), False),
}
Z_INFO = {v[0]: v for v in ELEMENTS.values()}
H_MASS = 1.008


def allowed_valences(z, charge):
    if z == 5:
        shift = -charge
    elif z == 6:
        shift = -abs(charge)
    else:
        shift = charge
    return [v + shift for v in Z_INFO[z][2] if v + shift >= 0]


# ---- 64-bit mixing (on-disk contract, identical constants everywhere) -------


def mix64(x):
    x = (x + 0x9E3779B97F4A7C15) & M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & M64
    return x ^ (x >> 31)


def hash_combine(seed, v):
    return mix64(seed ^ ((v + 0x9E3779B97F4A7C15 + ((seed << 6) & M64) + (seed >> 2)) & M64))


# ---- molecule model ----------------------------------------------------------


class Atom:
    __slots__ = ("z", "charge", "arom", "bracket", "explicit_h", "implicit_h")

    def __init__(self, z, arom=False, bracket=False, charge=0, explicit_h=0):
        self.z = z
        self.charge = charge
        self.arom = arom
        self.bracket = bracket
        self.explicit_h = explicit_h
        self.implicit_h = 0

    def total_h(self):
        return self.explicit_h + self.implicit_h


class Bond:
    __slots__ = ("a", "b", "order", "kekule", "arom_written", "in_ring")

    def __init__(self, a, b, order, arom_written=False):
        self.a = a
        self.b = b
        self.order = order  # 1,2,3 or 4 (aromatic)
        self.kekule = order if order != 4 else 1
        self.arom_written = arom_written
        self.in_ring = False

    def other(self, x):
        return self.b if x == self.a else self.a


class Mol:
    def __init__(self):
        self.atoms = []
        self.bonds = []
        self.adj = []
        self.sssr = []

    def degree(self, i):
        return len(self.adj[i])

    def bonds_of(self, i):
        return self.adj[i]

    def in_ring(self, i):
        return any(self.bonds[b].in_ring for b in self.adj[i])

    def ring_count(self, i):
        return sum(1 for ring in self.sssr if i in ring)

    def in_ring_of_size(self, i, size):
        return any(len(ring) == size and i in ring for ring in self.sssr)

    def kekule_sum(self, i):
        return sum(self.bonds[b].kekule for b in self.adj[i])


class ParseError(ValueError):
    pass


# ---- SMILES parsing (supported subset) ---------------------------------------


def _read_bracket(s, i):
    j = s.index("]", i)
    body = s[i + 1 : j]
    k = 0
    sym = None
    arom = False
    if k < len(body) and body[k].isupper():
        if body[k : k + 2] in ("Cl", "Br"):
            sym = body[k : k + 2]
            k += 2
        elif body[k] in ELEMENTS:
            sym = body[k]
            k += 1
    elif k < len(body) and body[k].islower():
        up = body[k].upper()
        if up in ELEMENTS and ELEMENTS[up][3]:
            sym = up
            arom = True
            k += 1
    if sym is None:
        raise ParseError(f"bad bracket atom [{body}]")
    h = 0
    charge = 0
    while k < len(body):
        c = body[k]
        if c == "H":
            k += 1
            n = ""
            while k < len(body) and body[k].isdigit():
                n += body[k]
                k += 1
            h = int(n) if n else 1
        elif c in "+-":
            sign = 1 if c == "+" else -1
            k += 1
            n = ""
            while k < len(body) and body[k].isdigit():
                n += body[k]
                k += 1
            if n:
                charge = sign * int(n)
            else:
                charge = sign
                while k < len(body) and body[k] == c:
                    charge += sign
                    k += 1
        else:
            raise ParseError(f"unsupported bracket feature [{body}]")
    return Atom(ELEMENTS[sym][0], arom, True, charge, h), j + 1


def parse_smiles(s):
    mol = Mol()
    prev = -1
    pending = 0  # 0 none; else bond order
    pending_arom_written = False
    stack = []
    ring = {}
    i = 0
    n = len(s)

    def add_atom(atom):
        nonlocal prev, pending, pending_arom_written
        idx = len(mol.atoms)
        mol.atoms.append(atom)
        if prev >= 0:
            if pending:
                order = pending
                aw = pending_arom_written
            else:
                order = 4 if (mol.atoms[prev].arom and atom.arom) else 1
                aw = False
            mol.bonds.append(Bond(prev, idx, order, aw))
        pending = 0
        pending_arom_written = False
        prev = idx

    while i < n:
        c = s[i]
        if c == "[":
            atom, i = _read_bracket(s, i)
            add_atom(atom)
            continue
        if c.isupper():
            sym = s[i : i + 2] if s[i : i + 2] in ("Cl", "Br") else c
            if sym not in ELEMENTS:
                raise ParseError(f"unknown element at {i}")
            add_atom(Atom(ELEMENTS[sym][0]))
            i += len(sym)
            continue
        if c.islower():
            up = c.upper()
            if up not in ELEMENTS or not ELEMENTS[up][3]:
                raise ParseError(f"unknown aromatic element at {i}")
            add_atom(Atom(ELEMENTS[up][0], arom=True))
            i += 1
            continue
        if c in "-=#:":
            if pending:
                raise ParseError("two bond symbols in a row")
            pending = {"-": 1, "=": 2, "#": 3, ":": 4}[c]
            pending_arom_written = c == ":"
            i += 1
            continue
        if c == "(":
            stack.append(prev)
            i += 1
            continue
        if c == ")":
            prev = stack.pop()
            i += 1
            continue
        if c.isdigit() or c == "%":
            if c == "%":
                num = int(s[i + 1 : i + 3])
                i += 3
            else:
                num = int(c)
                i += 1
            if num in ring:
                at, order, aw = ring.pop(num)
                if pending and order and pending != order:
                    raise ParseError("ring bond written differently at both ends")
                o = pending or order
                if not o:
                    o = 4 if (mol.atoms[at].arom and mol.atoms[prev].arom) else 1
                    use_aw = False
                else:
                    use_aw = aw or pending_arom_written
                mol.bonds.append(Bond(at, prev, o, use_aw))
            else:
                ring[num] = (prev, pending, pending_arom_written)
            pending = 0
            pending_arom_written = False
            continue
        raise ParseError(f"unsupported character {c!r} at {i}")

    if ring or stack or pending:
        raise ParseError("unterminated SMILES")
    if not mol.atoms:
        raise ParseError("empty SMILES")
    finalize(mol)
    return mol


# ---- perception pipeline ------------------------------------------------------


def _ring_bonds(mol):
    """Bond indices on cycles (= non-bridges), via iterative DFS lowlinks."""
    n = len(mol.atoms)
    visited = [False] * n
    disc = [0] * n
    low = [0] * n
    bridges = set()
    timer = [0]
    for root in range(n):
        if visited[root]:
            continue
        stack = [(root, -1, iter(mol.adj[root]))]
        visited[root] = True
        disc[root] = low[root] = timer[0]
        timer[0] += 1
        while stack:
            v, pbond, it = stack[-1]
            bi = next(it, None)
            if bi is None:
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    low[u] = min(low[u], low[v])
                    if low[v] > disc[u]:
                        bridges.add(pbond)
                continue
            if bi == pbond:
                continue
            w = mol.bonds[bi].other(v)
            if visited[w]:
                low[v] = min(low[v], disc[w])
            else:
                visited[w] = True
                disc[w] = low[w] = timer[0]
                timer[0] += 1
                stack.append((w, bi, iter(mol.adj[w])))
    return [bi for bi in range(len(mol.bonds)) if bi not in bridges]


def _smallest_cycle_through(mol, bi, ring_bond_set):
    """Shortest cycle using bond bi, as a frozenset of bond indices."""
    src = mol.bonds[bi].a
    dst = mol.bonds[bi].b
    # BFS from src to dst avoiding bi, over ring bonds only
    prev = {src: (-1, -1)}
    queue = [src]
    while queue:
        nxt = []
        for v in queue:
            for b2 in mol.adj[v]:
                if b2 == bi or b2 not in ring_bond_set:
                    continue
                w = mol.bonds[b2].other(v)
                if w in prev:
                    continue
                prev[w] = (v, b2)
                if w == dst:
                    path = [bi]
                    x = dst
                    while x != src:
                        px, pb = prev[x]
                        path.append(pb)
                        x = px
                    return frozenset(path)
                nxt.append(w)
        queue = nxt
    return None


def perceive_rings(mol):
    ring_bonds = _ring_bonds(mol)
    for bi in ring_bonds:
        mol.bonds[bi].in_ring = True
    rbset = set(ring_bonds)
    candidates = []
    for bi in ring_bonds:
        cyc = _smallest_cycle_through(mol, bi, rbset)
        if cyc:
            candidates.append(cyc)
    candidates = sorted(set(candidates), key=lambda c: (len(c), sorted(c)))
    # GF(2) independence over bond-index vectors
    basis = []  # reduced echelon rows as frozensets paired with pivot
    chosen = []

    def reduce(vec):
        v = set(vec)
        for pivot, row in basis:
            if pivot in v:
                v ^= row
        return v

    ring_atoms_n = len({a for bi in ring_bonds for a in (mol.bonds[bi].a, mol.bonds[bi].b)})
    # cyclomatic number of the ring subgraph = bonds - atoms + components
    comp = _ring_components(mol, rbset)
    dim = len(ring_bonds) - ring_atoms_n + comp
    for cyc in candidates:
        if len(chosen) == dim:
            break
        v = reduce(cyc)
        if v:
            basis.append((next(iter(v)), v))
            chosen.append(cyc)
    mol.sssr = []
    for cyc in chosen:
        mol.sssr.append(_cycle_atoms(mol, cyc))


def _ring_components(mol, rbset):
    seen = set()
    comp = 0
    for bi in rbset:
        for start in (mol.bonds[bi].a, mol.bonds[bi].b):
            if start in seen:
                continue
            comp += 1
            stack = [start]
            seen.add(start)
            while stack:
                v = stack.pop()
                for b2 in mol.adj[v]:
                    if b2 not in rbset:
                        continue
                    w = mol.bonds[b2].other(v)
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
    return comp


def _cycle_atoms(mol, cyc):
    """Order the atoms of a bond-set cycle by walking it."""
    adj = {}
    for bi in cyc:
        b = mol.bonds[bi]
        adj.setdefault(b.a, []).append(b.b)
        adj.setdefault(b.b, []).append(b.a)
    start = min(adj)
    out = [start]
    prev = -1
    cur = start
    while True:
        nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
        if nxt == start:
            break
        out.append(nxt)
        prev, cur = cur, nxt
    return out


def aromatic_h_guess(mol, i):
    a = mol.atoms[i]
    if a.bracket:
        return a.explicit_h
    vals = allowed_valences(a.z, a.charge)
    v = vals[0] if vals else 0
    return max(0, v - 1 - mol.degree(i))


def _pi_role(mol, i, h):
    """0 = needs an in-ring double, 1 = complete, -1 = invalid."""
    a = mol.atoms[i]
    vals = allowed_valences(a.z, a.charge)
    if not vals:
        return -1
    sigma = mol.degree(i) + h
    pi = 0
    for bi in mol.adj[i]:
        if mol.bonds[bi].order == 2:
            pi += 1
        elif mol.bonds[bi].order == 3:
            pi += 2
    v = vals[0]
    if sigma + pi == v - 1:
        return 0
    if sigma + pi == v:
        return 1
    return -1


def kekulize(mol):
    n = len(mol.atoms)
    needs = [False] * n
    for i, a in enumerate(mol.atoms):
        if not a.arom:
            continue
        if not Z_INFO[a.z][3]:
            raise ParseError("element cannot be aromatic")
        if not mol.in_ring(i):
            raise ParseError("aromatic atom outside any ring")
        role = _pi_role(mol, i, aromatic_h_guess(mol, i))
        if role < 0:
            raise ParseError("aromatic atom with impossible valence")
        needs[i] = role == 0
    arom_bonds = []
    for bi, b in enumerate(mol.bonds):
        if b.order == 4:
            if not b.in_ring:
                if b.arom_written:
                    raise ParseError("aromatic bond outside a ring")
                b.order = b.kekule = 1
                continue
            b.kekule = 1
            arom_bonds.append(bi)
        else:
            b.kekule = b.order
    cand = [[] for _ in range(n)]
    for bi in arom_bonds:
        b = mol.bonds[bi]
        if needs[b.a] and needs[b.b]:
            cand[b.a].append(b.b)
            cand[b.b].append(b.a)
    todo = sorted((i for i in range(n) if needs[i]), key=lambda i: len(cand[i]))
    match = [-1] * n

    def rec(idx):
        if idx == len(todo):
            return True
        v = todo[idx]
        if match[v] != -1:
            return rec(idx + 1)
        for w in cand[v]:
            if match[w] != -1:
                continue
            match[v] = w
            match[w] = v
            if rec(idx + 1):
                return True
            match[v] = match[w] = -1
        return False

    if not rec(0):
        raise ParseError("aromatic system cannot be kekulized")
    for bi in arom_bonds:
        b = mol.bonds[bi]
        if match[b.a] == b.b:
            b.kekule = 2
        b.order = b.kekule


def assign_hydrogens(mol):
    for i, a in enumerate(mol.atoms):
        bond_sum = mol.kekule_sum(i)
        if a.bracket:
            a.implicit_h = 0
        else:
            h = -1
            for v in allowed_valences(a.z, 0):
                if v >= bond_sum:
                    h = v - bond_sum
                    break
            if h < 0:
                raise ParseError("valence exceeded")
            a.implicit_h = h
        vals = allowed_valences(a.z, a.charge)
        if not vals:
            raise ParseError("unsupported charge state")
        if bond_sum + a.total_h() > max(vals):
            raise ParseError("valence exceeded")


def _pi_contribution(mol, i, in_system):
    a = mol.atoms[i]
    d_in = d_ring = d_acyc = triple = False
    for bi in mol.adj[i]:
        b = mol.bonds[bi]
        if b.kekule == 2:
            o = b.other(i)
            if in_system[o]:
                d_in = True
            elif mol.in_ring(o):
                d_ring = True
            else:
                d_acyc = True
        elif b.kekule == 3:
            triple = True
    if triple:
        return -1
    if d_in or d_ring:
        return 1
    if d_acyc:
        return 0
    vals = allowed_valences(a.z, a.charge)
    if not vals:
        return -1
    sigma = mol.degree(i) + a.total_h()
    v = vals[0]
    if sigma == v:
        if a.z in (7, 8, 15, 16):
            return 2
        if a.z == 6:
            return 2 if a.charge < 0 else -1
        if a.z == 5:
            return 0
        return -1
    if sigma == v - 1 and a.z == 6 and a.charge > 0:
        return 0
    return -1


def _huckel(pi):
    return pi >= 2 and (pi - 2) % 4 == 0


def perceive_aromaticity(mol):
    n = len(mol.atoms)
    written = [a.arom for a in mol.atoms]
    for a in mol.atoms:
        a.arom = False
    arom = [False] * n
    failed = []
    for ring in mol.sssr:
        in_sys = [False] * n
        for a in ring:
            in_sys[a] = True
        pi = 0
        ok = True
        for a in ring:
            c = _pi_contribution(mol, a, in_sys)
            if c < 0:
                ok = False
                break
            pi += c
        if ok and _huckel(pi):
            for a in ring:
                arom[a] = True
        elif ok:
            failed.append(ring)
    if len(failed) >= 2:
        groups = []
        assigned = [-1] * len(failed)
        for i in range(len(failed)):
            if assigned[i] != -1:
                continue
            assigned[i] = len(groups)
            members = set(failed[i])
            queue = [i]
            while queue:
                cur = queue.pop()
                for j in range(len(failed)):
                    if assigned[j] == -1 and members & set(failed[j]):
                        assigned[j] = assigned[i]
                        members |= set(failed[j])
                        queue.append(j)
            groups.append(sorted(members))
        for members in groups:
            if len(members) < 3:
                continue
            in_sys = [False] * n
            for a in members:
                in_sys[a] = True
            pi = 0
            ok = True
            for a in members:
                c = _pi_contribution(mol, a, in_sys)
                if c < 0:
                    ok = False
                    break
                pi += c
            if ok and _huckel(pi):
                for a in members:
                    arom[a] = True
    for i, a in enumerate(mol.atoms):
        a.arom = arom[i]
        if written[i] and not arom[i]:
            raise ParseError("written aromatic ring fails the aromaticity model")
    # bond normalization: bonds of all-aromatic SSSR rings become aromatic
    for ring in mol.sssr:
        if not all(mol.atoms[a].arom for a in ring):
            continue
        for k in range(len(ring)):
            u, v = ring[k], ring[(k + 1) % len(ring)]
            for bi in mol.adj[u]:
                b = mol.bonds[bi]
                if b.other(u) == v and b.kekule in (1, 2):
                    b.order = 4


def finalize(mol):
    mol.adj = [[] for _ in mol.atoms]
    for bi, b in enumerate(mol.bonds):
        mol.adj[b.a].append(bi)
        mol.adj[b.b].append(bi)
    perceive_rings(mol)
    kekulize(mol)
    assign_hydrogens(mol)
    perceive_aromaticity(mol)


# ---- Morgan environments (on-disk contract) -----------------------------------


def morgan_environments(mol, radius=2):
    env = []
    for i, a in enumerate(mol.atoms):
        h = mix64(a.z)
        h = hash_combine(h, (a.charge + 16) & M64)
        h = hash_combine(h, mol.degree(i))
        h = hash_combine(h, a.total_h())
        h = hash_combine(h, 1 if mol.in_ring(i) else 0)
        h = hash_combine(h, 1 if a.arom else 0)
        env.append(h)
    for r in range(1, radius + 1):
        nxt = []
        for i in range(len(mol.atoms)):
            nb = sorted(
                hash_combine(mix64(mol.bonds[bi].order), env[mol.bonds[bi].other(i)])
                for bi in mol.adj[i]
            )
            h = hash_combine(mix64(r), env[i])
            for x in nb:
                h = hash_combine(h, x)
            nxt.append(h)
        env = nxt
    return env


# ---- minimal SMARTS subset (for the alert catalogue) ---------------------------

# node: ("any",) ("elem",z) ("elem_al",z) ("elem_ar",z) ("arom",) ("aliph",)
#       ("deg",n) ("h",n) ("conn",n) ("ringmem",) ("ringcount",n) ("charge",n)
#       ("not",x) ("and",x,y) ("or",x,y)


class SmartsParser:
    def __init__(self, s):
        self.s = s
        self.i = 0
        self.atoms = []  # expression trees
        self.bonds = []  # (a, b, bond char or None)

    def fail(self, msg):
        raise ParseError(f"SMARTS {self.s!r}: {msg} at {self.i}")

    def peek(self):
        return self.s[self.i] if self.i < len(self.s) else ""

    def read_digits(self, default):
        n = ""
        while self.peek().isdigit():
            n += self.s[self.i]
            self.i += 1
        return int(n) if n else default

    def prim(self):
        c = self.peek()
        if c == "*":
            self.i += 1
            return ("any",)
        if c == "#":
            self.i += 1
            return ("elem", self.read_digits(None))
        if c == "a":
            self.i += 1
            return ("arom",)
        if c == "A":
            self.i += 1
            return ("aliph",)
        if c == "D":
            self.i += 1
            return ("deg", self.read_digits(1))
        if c == "H":
            self.i += 1
            return ("h", self.read_digits(1))
        if c == "X":
            self.i += 1
            return ("conn", self.read_digits(1))
        if c == "R":
            self.i += 1
            n = self.read_digits(-1)
            return ("ringmem",) if n < 0 else ("ringcount", n)
        if c in "+-":
            sign = 1 if c == "+" else -1
            self.i += 1
            n = self.read_digits(None)
            if n is None:
                n = 1
                while self.peek() == c:
                    n += 1
                    self.i += 1
            return ("charge", sign * n)
        two = self.s[self.i : self.i + 2]
        if two in ("Cl", "Br"):
            self.i += 2
            return ("elem_al", ELEMENTS[two][0])
        if c.isupper() and c in ELEMENTS:
            self.i += 1
            return ("elem_al", ELEMENTS[c][0])
        if c.islower() and c.upper() in ELEMENTS and ELEMENTS[c.upper()][3]:
            self.i += 1
            return ("elem_ar", ELEMENTS[c.upper()][0])
        self.fail("bad primitive")

    def unary(self):
        if self.peek() == "!":
            self.i += 1
            return ("not", self.unary())
        return self.prim()

    def and_high(self):
        left = self.unary()
        while self.peek() and self.peek() not in ",;]":
            if self.peek() == "&":
                self.i += 1
            left = ("and", left, self.unary())
        return left

    def or_expr(self):
        left = self.and_high()
        while self.peek() == ",":
            self.i += 1
            left = ("or", left, self.and_high())
        return left

    def expr(self):
        left = self.or_expr()
        while self.peek() == ";":
            self.i += 1
            left = ("and", left, self.or_expr())
        return left

    def parse(self):
        prev = -1
        pending = None
        have_pending = False
        stack = []
        ring = {}

        def add(tree):
            nonlocal prev, pending, have_pending
            idx = len(self.atoms)
            self.atoms.append(tree)
            if prev >= 0:
                self.bonds.append((prev, idx, pending if have_pending else None))
            prev = idx
            pending = None
            have_pending = False

        while self.i < len(self.s):
            c = self.peek()
            if c == "[":
                self.i += 1
                tree = self.expr()
                if self.peek() != "]":
                    self.fail("unterminated bracket")
                self.i += 1
                add(tree)
            elif c in "-=#:~":
                pending = c
                have_pending = True
                self.i += 1
            elif c == "(":
                stack.append(prev)
                self.i += 1
            elif c == ")":
                prev = stack.pop()
                self.i += 1
            elif c.isdigit():
                num = int(c)
                self.i += 1
                if num in ring:
                    at, bc = ring.pop(num)
                    self.bonds.append((at, prev, bc if bc is not None else (pending if have_pending else None)))
                else:
                    ring[num] = (prev, pending if have_pending else None)
                pending = None
                have_pending = False
            else:
                add(self.prim())
        if ring or stack:
            self.fail("unterminated pattern")
        return self.atoms, self.bonds


def _atom_ok(tree, mol, i):
    a = mol.atoms[i]
    t = tree[0]
    if t == "any":
        return True
    if t == "elem":
        return a.z == tree[1]
    if t == "elem_al":
        return a.z == tree[1] and not a.arom
    if t == "elem_ar":
        return a.z == tree[1] and a.arom
    if t == "arom":
        return a.arom
    if t == "aliph":
        return not a.arom
    if t == "deg":
        return mol.degree(i) == tree[1]
    if t == "h":
        return a.total_h() == tree[1]
    if t == "conn":
        return mol.degree(i) + a.total_h() == tree[1]
    if t == "ringmem":
        return mol.in_ring(i)
    if t == "ringcount":
        return mol.ring_count(i) == tree[1]
    if t == "charge":
        return a.charge == tree[1]
    if t == "not":
        return not _atom_ok(tree[1], mol, i)
    if t == "and":
        return _atom_ok(tree[1], mol, i) and _atom_ok(tree[2], mol, i)
    if t == "or":
        return _atom_ok(tree[1], mol, i) or _atom_ok(tree[2], mol, i)
    raise AssertionError(t)


def _bond_ok(bc, order):
    if bc is None:
        return order in (1, 4)
    return {"-": order == 1, "=": order == 2, "#": order == 3, ":": order == 4, "~": True}[bc]


def smarts_match(pattern, mol):
    atoms, bonds = SmartsParser(pattern).parse()
    nq = len(atoms)
    adj = [[] for _ in range(nq)]
    for qa, qb, bc in bonds:
        adj[qa].append((qb, bc))
        adj[qb].append((qa, bc))
    # BFS order from atom 0 (patterns are connected)
    order = [0]
    seen = {0}
    k = 0
    while k < len(order):
        for w, _ in adj[order[k]]:
            if w not in seen:
                seen.add(w)
                order.append(w)
        k += 1
    mapping = {}
    used = set()

    def rec(idx):
        if idx == nq:
            return True
        q = order[idx]
        for t in range(len(mol.atoms)):
            if t in used or not _atom_ok(atoms[q], mol, t):
                continue
            ok = True
            for w, bc in adj[q]:
                if w in mapping:
                    tb = None
                    for bi in mol.adj[t]:
                        if mol.bonds[bi].other(t) == mapping[w]:
                            tb = mol.bonds[bi]
                            break
                    if tb is None or not _bond_ok(bc, tb.order):
                        ok = False
                        break
            if not ok:
                continue
            mapping[q] = t
            used.add(t)
            if rec(idx + 1):
                return True
            del mapping[q]
            used.discard(t)
        return False

    return rec(0)


# ---- descriptor computation ----------------------------------------------------


def read_tsv(path):
    rows = []
    with open(path) as f:
        for line in f:
            line = line.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            rows.append(line.split("\t"))
    return rows


class Tables:
    def __init__(self, data_dir, with_sa=True):
        order = ["mw", "alogp", "hba", "hbd", "psa", "rotb", "arom", "alerts"]
        self.qed = {}
        for row in read_tsv(f"{data_dir}/qed_params.tsv"):
            self.qed[row[0]] = [float(x) for x in row[1:]]
        assert all(k in self.qed for k in order)
        self.qed_order = order
        self.alogp = []
        for row in read_tsv(f"{data_dir}/alogp_contrib.tsv"):
            self.alogp.append(
                (
                    ELEMENTS[row[0]][0],
                    None if row[1] == "*" else int(row[1]),
                    None if row[2] == "*" else int(row[2]),
                    None if row[3] == "*" else int(row[3]),
                    None if row[4] == "*" else int(row[4]),
                    float(row[5]),
                )
            )
        self.psa = []
        for row in read_tsv(f"{data_dir}/psa_contrib.tsv"):
            self.psa.append(
                (
                    ELEMENTS[row[0]][0],
                    int(row[1]),
                    int(row[2]),
                    int(row[3]),
                    int(row[4]),
                    int(row[5]),
                    int(row[6]),
                    int(row[7]),
                    int(row[8]),
                    float(row[9]),
                )
            )
        self.alerts = [(r[0], r[1]) for r in read_tsv(f"{data_dir}/catalogues/qed_alerts.tsv")]
        self.sa = {}
        self.sa_missing = -4.0
        if with_sa:
            for row in read_tsv(f"{data_dir}/sa_fragments.tsv"):
                if row[0] == "missing":
                    self.sa_missing = float(row[1])
                else:
                    self.sa[int(row[0], 16)] = float(row[1])


def alogp_contribution(tables, mol, i):
    a = mol.atoms[i]
    het = any(mol.atoms[mol.bonds[bi].other(i)].z != 6 for bi in mol.adj[i])
    multi = any(mol.bonds[bi].kekule in (2, 3) for bi in mol.adj[i])
    for z, arom, charge, hetero, mb, value in tables.alogp:
        if z != a.z:
            continue
        if arom is not None and arom != (1 if a.arom else 0):
            continue
        if charge is not None and charge != a.charge:
            continue
        if hetero is not None and hetero != (1 if het else 0):
            continue
        if mb is not None and mb != (1 if multi else 0):
            continue
        return value
    return 0.0


def psa_contribution(tables, mol, i):
    a = mol.atoms[i]
    if a.z not in (7, 8):
        return 0.0
    ns = nd = nt = na = 0
    for bi in mol.adj[i]:
        o = mol.bonds[bi].order
        if o == 1:
            ns += 1
        elif o == 2:
            nd += 1
        elif o == 3:
            nt += 1
        else:
            na += 1
    ring3 = 1 if mol.in_ring_of_size(i, 3) else 0
    for z, arom, charge, h, s_, d_, t_, ar_, r3, value in tables.psa:
        if (z, arom, charge, h, s_, d_, t_, ar_, r3) == (
            a.z,
            1 if a.arom else 0,
            a.charge,
            a.total_h(),
            ns,
            nd,
            nt,
            na,
            ring3,
        ):
            return value
    x = mol.degree(i) + a.total_h()
    v = 30.5 - x * 8.2 + a.total_h() * 1.5 if a.z == 7 else 28.5 - x * 8.6 + a.total_h() * 1.5
    return max(0.0, v)


def count_rotatable(mol):
    n = 0
    for b in mol.bonds:
        if b.order != 1 or b.in_ring:
            continue
        if mol.degree(b.a) < 2 or mol.degree(b.b) < 2:
            continue

        def amide(nitrogen, carbon):
            if mol.atoms[nitrogen].z != 7 or mol.atoms[carbon].z != 6:
                return False
            return any(
                mol.bonds[bi].kekule == 2 and mol.atoms[mol.bonds[bi].other(carbon)].z == 8
                for bi in mol.adj[carbon]
            )

        if amide(b.a, b.b) or amide(b.b, b.a):
            continue
        n += 1
    return n


def properties(tables, mol):
    mw = sum(Z_INFO[a.z][1] + H_MASS * a.total_h() for a in mol.atoms)
    alogp = sum(alogp_contribution(tables, mol, i) for i in range(len(mol.atoms)))
    psa = sum(psa_contribution(tables, mol, i) for i in range(len(mol.atoms)))
    hba = sum(
        1
        for a in mol.atoms
        if a.z in (7, 8) and not (a.z == 7 and a.arom and a.total_h() > 0)
    )
    hbd = sum(1 for a in mol.atoms if a.z in (7, 8) and a.total_h() > 0)
    rotb = count_rotatable(mol)
    arom = sum(1 for ring in mol.sssr if all(mol.atoms[a].arom for a in ring))
    alerts = sum(1 for _, pat in tables.alerts if smarts_match(pat, mol))
    return {
        "mw": mw,
        "alogp": alogp,
        "hba": hba,
        "hbd": hbd,
        "psa": psa,
        "rotb": rotb,
        "arom": arom,
        "alerts": alerts,
    }


def ads(params, x):
    a, b, c, d, e, f, dmax, _w = params
    rise = 1.0 / (1.0 + math.exp(-(x - c + d / 2.0) / e))
    fall = 1.0 - 1.0 / (1.0 + math.exp(-(x - c - d / 2.0) / f))
    return a + b * rise * fall


def qed(tables, props, weighted=True):
    num = den = 0.0
    for name in tables.qed_order:
        p = tables.qed[name]
        d = min(1.0, max(1e-9, ads(p, props[name]) / p[6]))
        w = p[7] if weighted else 1.0
        num += w * math.log(d)
        den += w
    return math.exp(num / den)


def ring_complexity(mol):
    spiro = set()
    bridge = set()
    macro = False
    rings = mol.sssr
    for i in range(len(rings)):
        if len(rings[i]) > 8:
            macro = True
        for j in range(i + 1, len(rings)):
            shared = set(rings[i]) & set(rings[j])
            if len(shared) == 1:
                spiro |= shared
            elif len(shared) >= 3:
                for x in shared:
                    inside = sum(
                        1 for bi in mol.adj[x] if mol.bonds[bi].other(x) in shared
                    )
                    if inside == 1:
                        bridge.add(x)
    return len(spiro), len(bridge), macro


def pooled_environments(mol):
    """ECFP4-style fragment set: environments of every radius up to 2."""
    out = []
    for r in range(3):
        out.extend(morgan_environments(mol, r))
    return out


def sa_score(tables, mol):
    n = len(mol.atoms)
    if n == 0:
        return 1.0
    envs = pooled_environments(mol)
    frag = sum(tables.sa.get(e, tables.sa_missing) for e in envs)
    score1 = frag / len(envs)
    n_spiro, n_bridge, macro = ring_complexity(mol)
    score2 = -(
        (n ** 1.005 - n)
        + math.log10(n_spiro + 1)
        + math.log10(n_bridge + 1)
        + (math.log10(2) if macro else 0.0)
    )
    unique = len(set(envs))
    score3 = 0.5 * math.log(n / unique) if n > unique else 0.0
    raw = score1 + score2 + score3
    sa = 11.0 - (raw - (-4.0) + 1.0) / (2.5 - (-4.0)) * 9.0
    if sa > 8.0:
        sa = 8.0 + math.log(sa + 1.0 - 9.0)
    return min(10.0, max(1.0, sa))


# ---- file modes -----------------------------------------------------------------


def read_smi(path):
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(None, 1)
            out.append((parts[0], parts[1] if len(parts) > 1 else ""))
    return out


def gen_sa(corpus, out_path):
    counts = Counter()
    for smi, _ in read_smi(corpus):
        counts.update(pooled_environments(parse_smiles(smi)))
    with open(out_path, "w") as f:
        f.write(
            "# Morgan environment (radius 0..2, ECFP4-style) log-frequency scores\n"
            "# harvested from the bundled reference corpus, in the spirit of\n"
            "# Ertl & Schuffenhauer, J. Cheminf. 1, 8 (2009): value = log10(count),\n"
            "# clipped to [-4, 4]. Environments absent from the table score the\n"
            "# 'missing' value. Regenerate from any .smi corpus with\n"
            "# tools/ref_descriptors.py gen-sa; the id recipe (atom invariant +\n"
            "# splitmix64) is a stable contract shared with the fingerprint module.\n"
            "# columns: env_id_hex\tvalue\n"
        )
        f.write("missing\t-4.0\n")
        for env in sorted(counts):
            v = min(4.0, max(-4.0, math.log10(counts[env])))
            f.write(f"{env:016x}\t{v:.4f}\n")


def gen_panel(panel, data_dir, out_path):
    tables = Tables(data_dir)
    with open(out_path, "w") as f:
        f.write(
            "# Reference descriptor panel generated by tools/ref_descriptors.py\n"
            "# gen-panel — an independent Python implementation of the same\n"
            "# descriptor definitions and parameter tables.\n"
            "# columns: id\tsmiles\tmw\talogp\thba\thbd\tpsa\trotb\tarom\talerts\tqed\tsa\n"
        )
        for smi, mol_id in read_smi(panel):
            mol = parse_smiles(smi)
            p = properties(tables, mol)
            q = qed(tables, p)
            sa = sa_score(tables, mol)
            f.write(
                f"{mol_id}\t{smi}\t{p['mw']:.4f}\t{p['alogp']:.4f}\t{p['hba']}\t{p['hbd']}\t"
                f"{p['psa']:.4f}\t{p['rotb']}\t{p['arom']}\t{p['alerts']}\t{q:.6f}\t{sa:.4f}\n"
            )


def check(data_dir, smiles_list):
    tables = Tables(data_dir)
    for smi in smiles_list:
        mol = parse_smiles(smi)
        p = properties(tables, mol)
        print(smi, {k: round(v, 4) if isinstance(v, float) else v for k, v in p.items()})
        print("  qed", round(qed(tables, p), 6), "qed_unweighted", round(qed(tables, p, False), 6),
              "sa", round(sa_score(tables, mol), 4))


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    mode = sys.argv[1]
    if mode == "gen-sa":
        gen_sa(sys.argv[2], sys.argv[3])
    elif mode == "gen-panel":
        gen_panel(sys.argv[2], sys.argv[3], sys.argv[4])
    elif mode == "check":
        check(sys.argv[2], sys.argv[3:])
    else:
        sys.exit(f"unknown mode {mode}")


if __name__ == "__main__":
    main()
