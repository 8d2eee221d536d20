"""Two-parameter families and resonance-tongue scans.

A family is a pair of branch matrices whose entries are tiny arithmetic
expressions in the parameters p1, p2 (plus pi, cos, sin, and integer
powers).  The scanner iterates the map over a parameter grid, detects
periodic attractors by recurrence, labels them with their rotation
numbers, and writes a deterministic CSV.  Tongue boundaries are
continued as zero sets of individual cycle points' first components,
and the width profile between two boundaries flags shrinking-point
candidates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import smallmat
from .cycles import BAND_TOL, solve_cycle
from .pwamap import ContinuityError, PwaMap
from .shrink import MapFamily
from .symseq import rotational, rotational_params


class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.line = line
        self.col = col


class EvalError(ValueError):
    """Expression evaluation produced a non-finite value."""


class ConfigError(ValueError):
    """Malformed family file or scan configuration."""


class SeedNotAdmissibleError(ValueError):
    """No admissible cycle of the requested word at the seed point."""


class ContinuationStalledError(RuntimeError):
    """Corrector failed or no boundary bracket was found."""


# ---------------------------------------------------------------------------
# Expression grammar: numbers, p/q literals, p1, p2, pi, + - * / unary -,
# parentheses, cos, sin, integer powers via ^.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Param:
    name: str  # "p1" or "p2"


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str  # cos or sin
    arg: "Expr"


Expr = Num | Param | Neg | BinOp | Pow | Call

_FUNCTIONS = {"cos": np.cos, "sin": np.sin}


class _Tokenizer:
    def __init__(self, text: str, line: int = 1, col: int = 1):
        self.text = text
        self.pos = 0
        self.line = line
        self.col = col
        self.tokens: list[tuple[str, str, int, int]] = []
        self._scan()
        self.index = 0

    def _scan(self):
        text = self.text
        i = 0
        line, col = self.line, self.col
        while i < len(text):
            ch = text[i]
            if ch == "\n":
                line += 1
                col = 1
                i += 1
                continue
            if ch.isspace():
                i += 1
                col += 1
                continue
            if ch.isdigit() or ch == ".":
                j = i
                while j < len(text) and (text[j].isdigit() or text[j] == "."):
                    j += 1
                if j < len(text) and text[j] in "eE":
                    k = j + 1
                    if k < len(text) and text[k] in "+-":
                        k += 1
                    if k < len(text) and text[k].isdigit():
                        while k < len(text) and text[k].isdigit():
                            k += 1
                        j = k
                self.tokens.append(("num", text[i:j], line, col))
                col += j - i
                i = j
                continue
            if ch.isalpha() or ch == "_":
                j = i
                while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                self.tokens.append(("ident", text[i:j], line, col))
                col += j - i
                i = j
                continue
            if ch in "+-*/^()":
                self.tokens.append((ch, ch, line, col))
                i += 1
                col += 1
                continue
            raise ParseError(f"unexpected character {ch!r}", line, col)
        self.tokens.append(("eof", "", line, col))

    def peek(self):
        return self.tokens[self.index]

    def advance(self):
        tok = self.tokens[self.index]
        if tok[0] != "eof":
            self.index += 1
        return tok


class _Parser:
    """Recursive descent over: expr > term > unary > power > atom."""

    def __init__(self, text: str, line: int = 1, col: int = 1):
        self.toks = _Tokenizer(text, line, col)

    def parse(self) -> Expr:
        node = self._expr()
        kind, value, line, col = self.toks.peek()
        if kind != "eof":
            raise ParseError(f"trailing input {value!r}", line, col)
        return node

    def _expr(self) -> Expr:
        node = self._term()
        while self.toks.peek()[0] in "+-":
            op = self.toks.advance()[0]
            node = BinOp(op, node, self._term())
        return node

    def _term(self) -> Expr:
        node = self._unary()
        while self.toks.peek()[0] in "*/":
            op = self.toks.advance()[0]
            node = BinOp(op, node, self._unary())
        return node

    def _unary(self) -> Expr:
        if self.toks.peek()[0] == "-":
            self.toks.advance()
            return Neg(self._unary())
        if self.toks.peek()[0] == "+":
            self.toks.advance()
            return self._unary()
        return self._power()

    def _power(self) -> Expr:
        base = self._atom()
        if self.toks.peek()[0] == "^":
            self.toks.advance()
            sign = 1
            if self.toks.peek()[0] == "-":
                self.toks.advance()
                sign = -1
            kind, value, line, col = self.toks.advance()
            if kind != "num" or not value.isdigit():
                raise ParseError("exponent must be an integer literal", line, col)
            return Pow(base, sign * int(value))
        return base

    def _atom(self) -> Expr:
        kind, value, line, col = self.toks.advance()
        if kind == "num":
            try:
                return Num(float(value))
            except ValueError:
                raise ParseError(f"bad number {value!r}", line, col) from None
        if kind == "ident":
            if value == "pi":
                return Num(math.pi)
            if value in ("p1", "p2"):
                return Param(value)
            if value in _FUNCTIONS:
                if self.toks.peek()[0] != "(":
                    raise ParseError(f"{value} needs parentheses", line, col)
                self.toks.advance()
                arg = self._expr()
                k2, _, l2, c2 = self.toks.advance()
                if k2 != ")":
                    raise ParseError("expected ')'", l2, c2)
                return Call(value, arg)
            raise ParseError(f"unknown identifier {value!r}", line, col)
        if kind == "(":
            node = self._expr()
            k2, _, l2, c2 = self.toks.advance()
            if k2 != ")":
                raise ParseError("expected ')'", l2, c2)
            return node
        raise ParseError(f"unexpected token {value!r}", line, col)


def parse_expression(text: str, line: int = 1, col: int = 1) -> Expr:
    return _Parser(text, line, col).parse()


def eval_expression(node: Expr, p1, p2):
    """Evaluate on scalars or numpy arrays (parameters broadcast through)."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Param):
        return p1 if node.name == "p1" else p2
    if isinstance(node, Neg):
        return -eval_expression(node.arg, p1, p2)
    if isinstance(node, BinOp):
        a = eval_expression(node.left, p1, p2)
        b = eval_expression(node.right, p1, p2)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        with np.errstate(divide="ignore", invalid="ignore"):
            return a / b
    if isinstance(node, Pow):
        base = eval_expression(node.base, p1, p2)
        with np.errstate(divide="ignore", invalid="ignore"):
            return base ** float(node.exponent)
    if isinstance(node, Call):
        return _FUNCTIONS[node.func](eval_expression(node.arg, p1, p2))
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# Family specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FamilySpec:
    """Matrices with expression entries over (p1, p2), fixed mu, and a box."""

    N: int
    a_l: tuple
    a_r: tuple
    b: tuple
    mu: float
    box: tuple[float, float, float, float]
    name: str = ""

    def map_at(self, p1: float, p2: float) -> PwaMap:
        n = self.N
        a_l = np.array([[eval_expression(self.a_l[i][j], p1, p2)
                         for j in range(n)] for i in range(n)], dtype=float)
        a_r = np.array([[eval_expression(self.a_r[i][j], p1, p2)
                         for j in range(n)] for i in range(n)], dtype=float)
        b = np.array([eval_expression(self.b[i], p1, p2) for i in range(n)],
                     dtype=float)
        return PwaMap(a_l, a_r, b)

    def stacks(self, p1: np.ndarray, p2: np.ndarray):
        """Batched matrices (C, N, N) and offsets (C, N) over parameter arrays."""
        c, n = p1.shape[0], self.N
        a_l = np.empty((c, n, n))
        a_r = np.empty((c, n, n))
        b = np.empty((c, n))
        for i in range(n):
            for j in range(n):
                a_l[:, i, j] = eval_expression(self.a_l[i][j], p1, p2)
                a_r[:, i, j] = eval_expression(self.a_r[i][j], p1, p2)
            b[:, i] = eval_expression(self.b[i], p1, p2)
        return a_l, a_r, b

    def family(self) -> MapFamily:
        return MapFamily(builder=self.map_at, mu=self.mu, box=self.box,
                         name=self.name)


FIG1_TEXT = """\
# built-in two-parameter family: p1 = rotation fraction, p2 = right-branch scale
N = 2
A_L = 6/5*cos(2*pi*p1), 1, -9/25, 0
A_R = 2/p2*cos(2*pi*p1), 1, -1/p2^2, 0
b = 1, 0
mu = 1
box = 0.05, 0.45, 0.3, 0.95
"""

_BUILTINS = {"fig1": FIG1_TEXT}


def _split_entries(text: str) -> list[str]:
    parts = [p for p in text.split(",")]
    if any(not p.strip() for p in parts):
        raise ConfigError(f"empty entry in {text!r}")
    return parts


def parse_family(text: str, name: str = "") -> FamilySpec:
    """Parse the key = value family format; see FIG1_TEXT for the shape.

    Validates continuity (shared columns must match as expressions) and
    finiteness of every entry at the box corners.
    """
    if text.strip() in _BUILTINS:
        return builtin_family(text.strip())
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = (value.strip(), lineno)
    for key in ("N", "A_L", "A_R", "b", "mu", "box"):
        if key not in entries:
            raise ConfigError(f"missing key {key!r} in family definition")
    n = int(entries["N"][0])

    def grid(key: str) -> tuple:
        value, lineno = entries[key]
        parts = _split_entries(value)
        if len(parts) != n * n:
            raise ConfigError(f"{key}: expected {n * n} entries, got {len(parts)}")
        exprs = [parse_expression(p, line=lineno) for p in parts]
        return tuple(tuple(exprs[i * n:(i + 1) * n]) for i in range(n))

    a_l = grid("A_L")
    a_r = grid("A_R")
    b_value, b_line = entries["b"]
    b_parts = _split_entries(b_value)
    if len(b_parts) != n:
        raise ConfigError(f"b: expected {n} entries, got {len(b_parts)}")
    b = tuple(parse_expression(p, line=b_line) for p in b_parts)
    mu = float(eval_expression(parse_expression(entries["mu"][0]), 0.0, 0.0))
    box_parts = _split_entries(entries["box"][0])
    if len(box_parts) != 4:
        raise ConfigError("box needs four values: p1_min, p1_max, p2_min, p2_max")
    box = tuple(float(eval_expression(parse_expression(p), 0.0, 0.0))
                for p in box_parts)

    if n > 1:
        for i in range(n):
            for j in range(1, n):
                if a_l[i][j] != a_r[i][j]:
                    raise ContinuityError(
                        f"entry ({i}, {j}) differs between A_L and A_R; only the "
                        "first column may differ")

    spec = FamilySpec(N=n, a_l=a_l, a_r=a_r, b=b, mu=mu, box=box, name=name)
    corners = [(box[0], box[2]), (box[0], box[3]), (box[1], box[2]),
               (box[1], box[3]),
               ((box[0] + box[1]) / 2, (box[2] + box[3]) / 2)]
    for p1, p2 in corners:
        for label, exprs in (("A_L", a_l), ("A_R", a_r), ("b", (b,))):
            for row in exprs:
                for e in row:
                    try:
                        v = eval_expression(e, p1, p2)
                    except ZeroDivisionError:
                        raise EvalError(
                            f"{label} entry divides by zero at ({p1}, {p2})"
                        ) from None
                    if not np.isfinite(v):
                        raise EvalError(
                            f"{label} entry evaluates to {v} at ({p1}, {p2})")
    return spec


def builtin_family(name: str) -> FamilySpec:
    if name not in _BUILTINS:
        raise ConfigError(f"unknown built-in family {name!r}")
    return parse_family(_BUILTINS[name], name=name)


# ---------------------------------------------------------------------------
# Grid scanning
# ---------------------------------------------------------------------------

LABEL_FIXED_L = "fixed_L"
LABEL_FIXED_R = "fixed_R"
LABEL_PERIODIC = "periodic"
LABEL_NONROT = "periodic_nonrot"
LABEL_NONE = "no_period"
LABEL_DIVERGED = "diverged"


@dataclass(frozen=True)
class ScanOptions:
    transient: int = 10_000
    recurrence_tol: float = 1e-9
    escape_factor: float = 1e6
    band: float = BAND_TOL
    stability_tol: float = 1e-6
    start_offset: float = 1e-6
    multi_start: bool = False
    seed: int = 0
    threads: int = 1


@dataclass
class TongueGrid:
    p1: np.ndarray
    p2: np.ndarray
    label: np.ndarray       # (C,) strings, row-major with p2 outer
    l: np.ndarray
    m: np.ndarray
    n: np.ndarray
    margin: np.ndarray
    max_multiplier: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (self.p2.size, self.p1.size)

    def cell_params(self) -> tuple[np.ndarray, np.ndarray]:
        pp2, pp1 = np.meshgrid(self.p2, self.p1, indexing="ij")
        return pp1.ravel(), pp2.ravel()

    def to_csv(self) -> str:
        pp1, pp2 = self.cell_params()
        lines = ["p1,p2,label,l,m,n,margin,max_multiplier"]
        for c in range(self.label.size):
            lines.append(
                f"{pp1[c]:.17g},{pp2[c]:.17g},{self.label[c]},"
                f"{self.l[c]},{self.m[c]},{self.n[c]},"
                f"{self.margin[c]:.17g},{self.max_multiplier[c]:.17g}")
        return "\n".join(lines) + "\n"


def _iterate_batch(a_l, a_r, b, mu, x, steps, escape, check_every=512):
    """Forced map iteration on a cell batch; diverged cells go NaN and stay."""
    n = x.shape[1]
    with np.errstate(over="ignore", invalid="ignore"):
        if n == 2:
            x0, x1 = x[:, 0].copy(), x[:, 1].copy()
            al00, al01 = a_l[:, 0, 0], a_l[:, 0, 1]
            al10, al11 = a_l[:, 1, 0], a_l[:, 1, 1]
            ar00, ar01 = a_r[:, 0, 0], a_r[:, 0, 1]
            ar10, ar11 = a_r[:, 1, 0], a_r[:, 1, 1]
            b0, b1 = mu * b[:, 0], mu * b[:, 1]
            for step in range(steps):
                left = x0 <= 0.0
                m00 = np.where(left, al00, ar00)
                m01 = np.where(left, al01, ar01)
                m10 = np.where(left, al10, ar10)
                m11 = np.where(left, al11, ar11)
                x0, x1 = b0 + m00 * x0 + m01 * x1, b1 + m10 * x0 + m11 * x1
                if step % check_every == check_every - 1:
                    bad = ~(np.abs(x0) + np.abs(x1) < escape)
                    if bad.any():
                        x0[bad] = np.nan
                        x1[bad] = np.nan
            out = np.column_stack([x0, x1])
        else:
            out = x.copy()
            for step in range(steps):
                left = out[:, 0] <= 0.0
                a_eff = np.where(left[:, None, None], a_l, a_r)
                out = mu * b + np.einsum("cij,cj->ci", a_eff, out)
                if step % check_every == check_every - 1:
                    bad = ~(np.linalg.norm(out, axis=1) < escape)
                    if bad.any():
                        out[bad] = np.nan
    return out


def _batched_fixed_start(a_l, a_r, b, mu, offset):
    """Start at the admissible fixed point (left preferred) or at mu*b."""
    c, n = b.shape
    eye = np.eye(n)
    start = mu * b.copy()
    taken = np.zeros(c, dtype=bool)
    for a, side in ((a_l, "L"), (a_r, "R")):
        ia = eye[None, :, :] - a
        ok = np.abs(np.linalg.det(ia)) > 1e-12
        x = np.full((c, n), np.nan)
        if ok.any():
            x[ok] = np.linalg.solve(ia[ok], (mu * b[ok])[..., None])[..., 0]
        admissible = ok & np.isfinite(x).all(axis=1)
        admissible &= (x[:, 0] < 0.0) if side == "L" else (x[:, 0] > 0.0)
        use = admissible & ~taken
        start[use] = x[use]
        taken |= use
    # deterministic nudge off exact fixed points so unstable ones do not pin
    return start + offset * (1.0 + np.abs(start))


def _detect_periods(window: np.ndarray, n_max: int, tol: float) -> np.ndarray:
    """Smallest p <= n_max with p sustained tail matches; 0 when none."""
    w_len, c, _ = window.shape
    period = np.zeros(c, dtype=int)
    finite = np.isfinite(window[-1]).all(axis=1)
    for p in range(1, n_max + 1):
        todo = (period == 0) & finite
        if not todo.any():
            break
        ok = todo.copy()
        for j in range(p):
            a = window[w_len - 1 - j]
            bb = window[w_len - 1 - p - j]
            scale = np.maximum(1.0, np.linalg.norm(a, axis=1))
            ok &= np.linalg.norm(a - bb, axis=1) <= tol * scale
            if not ok.any():
                break
        period[ok] = p
    return period


def _scan_chunk(spec: FamilySpec, p1c, p2c, n_max: int, options: ScanOptions,
                start_chunk=None):
    a_l, a_r, b = spec.stacks(p1c, p2c)
    mu = spec.mu
    escape = options.escape_factor * max(abs(mu), 1e-12)
    if start_chunk is None:
        x = _batched_fixed_start(a_l, a_r, b, mu, options.start_offset)
    else:
        x = start_chunk.copy()
    x = _iterate_batch(a_l, a_r, b, mu, x, options.transient, escape)
    w_len = 2 * n_max + 1
    window = np.empty((w_len, x.shape[0], x.shape[1]))
    window[0] = x
    for k in range(1, w_len):
        x = _iterate_batch(a_l, a_r, b, mu, x, 1, escape, check_every=1)
        window[k] = x
    period = _detect_periods(window, n_max, options.recurrence_tol)
    diverged = ~np.isfinite(window[-1]).all(axis=1)
    diverged |= np.linalg.norm(np.nan_to_num(window[-1]), axis=1) > escape
    return period, diverged, window[-n_max - 1:]


def _validate_groups(spec, pp1, pp2, period, diverged, tail, n_max, options):
    """Re-solve detected cycles in batches grouped by itinerary word."""
    c = period.size
    label = np.full(c, LABEL_NONE, dtype=object)
    l_arr = np.zeros(c, dtype=int)
    m_arr = np.zeros(c, dtype=int)
    n_arr = np.zeros(c, dtype=int)
    margin = np.full(c, np.nan)
    maxmult = np.full(c, np.nan)
    label[diverged] = LABEL_DIVERGED

    # fixed points: the converged state itself decides the side
    fixed = (period == 1) & ~diverged
    if fixed.any():
        idx = np.flatnonzero(fixed)
        a_l, a_r, _ = spec.stacks(pp1[idx], pp2[idx])
        s = tail[-1, idx, 0]
        side_l = s <= 0.0
        mats = np.where(side_l[:, None, None], a_l, a_r)
        mods = np.max(np.abs(np.linalg.eigvals(mats)), axis=1)
        stable = mods < 1.0 + options.stability_tol
        label[idx[stable & side_l]] = LABEL_FIXED_L
        label[idx[stable & ~side_l]] = LABEL_FIXED_R
        margin[idx] = np.abs(s)
        maxmult[idx] = mods

    # periodic cells, grouped by word
    groups: dict[str, list[int]] = {}
    for cell in np.flatnonzero((period > 1) & ~diverged):
        p = period[cell]
        states = tail[-p:, cell, :]
        word = "".join("L" if sv <= 0.0 else "R" for sv in states[:, 0])
        groups.setdefault(word, []).append(cell)

    eye = np.eye(spec.N)
    for word, cells in groups.items():
        idx = np.asarray(cells)
        p = len(word)
        a_l, a_r, b = spec.stacks(pp1[idx], pp2[idx])
        g = idx.size
        mats = {"L": a_l, "R": a_r}
        m_stack = np.broadcast_to(eye, (g, spec.N, spec.N)).copy()
        for symbol in word:
            m_stack = mats[symbol] @ m_stack
        p_stack = np.broadcast_to(eye, (g, spec.N, spec.N)).copy()
        t_stack = np.broadcast_to(eye, (g, spec.N, spec.N)).copy()
        for i in range(p - 1, 0, -1):
            t_stack = t_stack @ mats[word[i]]
            p_stack = p_stack + t_stack
        ia = eye[None, :, :] - m_stack
        dets = np.linalg.det(ia)
        solvable = np.abs(dets) > 1e-12
        x0 = np.full((g, spec.N), np.nan)
        if solvable.any():
            rhs = spec.mu * np.einsum("cij,cj->ci", p_stack, b)
            x0[solvable] = np.linalg.solve(ia[solvable],
                                           rhs[solvable][..., None])[..., 0]
        orbit = np.empty((p + 1, g, spec.N))
        orbit[0] = x0
        for i, symbol in enumerate(word):
            orbit[i + 1] = spec.mu * b + np.einsum(
                "cij,cj->ci", mats[symbol], orbit[i])
        wrap_ok = np.linalg.norm(orbit[-1] - orbit[0], axis=1) <= \
            options.recurrence_tol * np.maximum(1.0, np.linalg.norm(orbit[0], axis=1))
        s_mat = orbit[:-1, :, 0]
        norms = np.maximum(1.0, np.linalg.norm(orbit[:-1], axis=2))
        on_manifold = np.abs(s_mat) <= options.band * norms
        want_neg = np.array([sym == "L" for sym in word])[:, None]
        violation = ~on_manifold & ((s_mat > 0) == want_neg)
        admissible = ~violation.any(axis=0)
        off = np.where(on_manifold, np.inf, np.abs(s_mat))
        cell_margin = off.min(axis=0)
        mods = np.max(np.abs(np.linalg.eigvals(m_stack)), axis=1)
        stable = mods < 1.0 + options.stability_tol
        good = solvable & wrap_ok & admissible & stable & \
            np.isfinite(x0).all(axis=1)
        params = rotational_params(word)
        margin[idx] = cell_margin
        maxmult[idx] = mods
        if params is not None:
            label[idx[good]] = LABEL_PERIODIC
            l_arr[idx[good]] = params.l
            m_arr[idx[good]] = params.m
            n_arr[idx[good]] = params.n
        else:
            label[idx[good]] = LABEL_NONROT
            n_arr[idx[good]] = p
    return label, l_arr, m_arr, n_arr, margin, maxmult


def _multi_start_points(spec: FamilySpec, pp1, pp2,
                        options: ScanOptions) -> list[np.ndarray]:
    """Both fixed points nudged by seeded random offsets, four starts."""
    a_l, a_r, b = spec.stacks(pp1, pp2)
    c, n = b.shape
    eye = np.eye(n)
    rng = np.random.default_rng(options.seed)
    bases = []
    for a in (a_l, a_r):
        ia = eye[None, :, :] - a
        ok = np.abs(np.linalg.det(ia)) > 1e-12
        x = spec.mu * b.copy()
        if ok.any():
            x[ok] = np.linalg.solve(ia[ok], (spec.mu * b[ok])[..., None])[..., 0]
        bases.append(x)
    starts = []
    for base in bases:
        for sign in (1.0, -1.0):
            u = rng.standard_normal(base.shape)
            u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1e-30)
            starts.append(base + sign * options.start_offset *
                          (1.0 + np.abs(base)) * u)
    return starts


def _single_pass(spec, pp1, pp2, n_max, options, start=None):
    c = pp1.size
    threads = max(1, options.threads)
    bounds = np.linspace(0, c, threads + 1).astype(int)
    chunks = [(a, bnd) for a, bnd in zip(bounds, bounds[1:]) if bnd > a]

    def run(pair):
        a, bnd = pair
        chunk_start = None if start is None else start[a:bnd]
        return _scan_chunk(spec, pp1[a:bnd], pp2[a:bnd], n_max, options,
                           chunk_start)

    if threads == 1 or len(chunks) == 1:
        results = [run(pair) for pair in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    period = np.concatenate([r[0] for r in results])
    diverged = np.concatenate([r[1] for r in results])
    tail = np.concatenate([r[2] for r in results], axis=1)
    return _validate_groups(spec, pp1, pp2, period, diverged, tail, n_max,
                            options)


def scan_tongues(spec: FamilySpec, grid: tuple[int, int], n_max: int,
                 options: ScanOptions = ScanOptions()) -> TongueGrid:
    """Label every grid cell with its detected attractor.

    Each cell is iterated from the admissible fixed point (nudged by a
    deterministic offset) or from mu*b; a period p <= n_max is detected
    by sustained recurrence, the itinerary is re-solved exactly and kept
    only if admissible and stable.  With multi_start enabled, four extra
    seeded starts around both fixed points expose coexisting attractors
    and the first conclusive label wins.  Results are deterministic and
    independent of the thread count.
    """
    w, h = grid
    if w < 1 or h < 1:
        raise ConfigError(f"empty grid {grid}")
    if n_max < 1:
        raise ConfigError(f"n_max must be >= 1, got {n_max}")
    if spec.mu == 0.0:
        raise ConfigError("scanning needs mu != 0")
    box = spec.box
    p1 = np.linspace(box[0], box[1], w) if w > 1 else np.array([box[0]])
    p2 = np.linspace(box[2], box[3], h) if h > 1 else np.array([box[2]])
    pp2, pp1 = np.meshgrid(p2, p1, indexing="ij")
    pp1, pp2 = pp1.ravel(), pp2.ravel()

    passes = [_single_pass(spec, pp1, pp2, n_max, options)]
    if options.multi_start:
        for start in _multi_start_points(spec, pp1, pp2, options):
            passes.append(_single_pass(spec, pp1, pp2, n_max, options, start))

    label, l_arr, m_arr, n_arr, margin, maxmult = passes[0]
    conclusive = (label != LABEL_NONE) & (label != LABEL_DIVERGED)
    for next_label, next_l, next_m, next_n, next_margin, next_mult in passes[1:]:
        better = ~conclusive & (next_label != LABEL_NONE) & \
            (next_label != LABEL_DIVERGED)
        label[better] = next_label[better]
        l_arr[better] = next_l[better]
        m_arr[better] = next_m[better]
        n_arr[better] = next_n[better]
        margin[better] = next_margin[better]
        maxmult[better] = next_mult[better]
        conclusive |= better
    return TongueGrid(p1=p1, p2=p2, label=label, l=l_arr, m=m_arr, n=n_arr,
                      margin=margin, max_multiplier=maxmult)


# ---------------------------------------------------------------------------
# Tongue boundary continuation and width profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContinuationOptions:
    step: float = 0.0          # 0: auto from box
    max_steps: int = 400
    corrector_tol: float = 1e-12
    search_dir: tuple[float, float] = (0.0, 1.0)
    max_search: float = 0.0    # 0: auto from box


@dataclass
class BoundaryCurve:
    index: int
    points: np.ndarray        # (K, 2)
    s_residuals: np.ndarray   # (K,)
    hit_singularity: bool


def _auto_steps(box, options: ContinuationOptions) -> tuple[float, float]:
    if box is None:
        box = (0.0, 1.0, 0.0, 1.0)
    diag = math.hypot(box[1] - box[0], box[3] - box[2])
    step = options.step if options.step > 0 else diag / 250.0
    reach = options.max_search if options.max_search > 0 else diag / 2.0
    return step, reach


def tongue_boundaries(family: MapFamily, l: int, m: int, n: int, seed_point,
                      options: ContinuationOptions = ContinuationOptions(),
                      tol_sing: float = smallmat.SINGULARITY_TOL,
                      band: float = BAND_TOL,
                      indices: list[int] | None = None) -> dict[int, BoundaryCurve]:
    """Continue the four border-collision boundary curves through a tongue.

    For each index in {0, -d, (l-1)d, ld} the zero set of that cycle
    point's first component is traced with a secant predictor and a 1D
    Newton corrector transverse to the tangent.  Tracing stops at the
    step budget, the family box, or where the cycle solution system goes
    singular.  Boundaries that cannot be bracketed from the seed (they
    may sit across the singular set) are absent from the result.
    """
    from .symseq import RotationalParams
    params = RotationalParams.make(l, m, n)
    d = params.d
    seq = rotational(l, m, n)
    seed = np.asarray(seed_point, dtype=float)
    if indices is None:
        indices = [0, (-d) % n, ((l - 1) * d) % n, (l * d) % n]
    step, reach = _auto_steps(family.box, options)

    def s_at(xi, k):
        """First component of cycle point k; None when the system is singular."""
        pwa = family.map_at(xi[0], xi[1])
        eye = np.eye(pwa.N)
        from .cycles import bc_matrix, orbit_under, stability_matrix
        m_mat = stability_matrix(pwa, seq)
        if smallmat.is_singular(eye - m_mat, tol_sing):
            return None
        x0 = np.linalg.solve(eye - m_mat,
                             family.mu * (bc_matrix(pwa, seq) @ pwa.b))
        pts = orbit_under(pwa, family.mu, seq, x0)
        return float(pts[k % n][0])

    seed_solution = solve_cycle(family.map_at(seed[0], seed[1]), family.mu,
                                seq, band=band)
    if not seed_solution.admissibility.ok:
        raise SeedNotAdmissibleError(
            f"no admissible {seq} cycle at {seed}: "
            f"violations {seed_solution.admissibility.violating_indices}")

    def in_box(xi) -> bool:
        if family.box is None:
            return True
        b = family.box
        pad1 = 0.05 * (b[1] - b[0])
        pad2 = 0.05 * (b[3] - b[2])
        return (b[0] - pad1 <= xi[0] <= b[1] + pad1 and
                b[2] - pad2 <= xi[1] <= b[3] + pad2)

    curves: dict[int, BoundaryCurve] = {}
    for k in indices:
        try:
            curves[k] = _trace_one(s_at, k, seed, step, reach, options, in_box)
        except ContinuationStalledError:
            continue  # that boundary is not reachable from this seed
    if not curves:
        raise ContinuationStalledError(
            f"no boundary of {seq} reachable from {seed}")
    return curves


def _bisect_verified(fun, lo, hi, v_lo, tol=1e-11):
    """Sign bisection that tolerates singular gaps; None unless |f(root)| small.

    A sign change across the singular set is a pole, not a root; the
    final residual check tells the two apart.
    """
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        v_mid = fun(mid)
        if v_mid is None:
            return None
        if abs(v_mid) <= tol:
            return mid
        if np.sign(v_mid) == np.sign(v_lo):
            lo, v_lo = mid, v_mid
        else:
            hi = mid
    v = fun(0.5 * (lo + hi))
    if v is not None and abs(v) <= 1e-9:
        return 0.5 * (lo + hi)
    return None


def _trace_one(s_at, k, seed, step, reach, options, in_box) -> BoundaryCurve:
    u = np.asarray(options.search_dir, dtype=float)
    u = u / np.linalg.norm(u)

    def line_value(t, direction):
        return s_at(seed + t * direction, k)

    perp = np.array([-u[1], u[0]])
    first = None
    for direction in (u, -u, perp, -perp):
        t_prev, v_prev = 0.0, line_value(0.0, direction)
        t = step
        while t <= reach and first is None:
            v = line_value(t, direction)
            if v is None or v_prev is None:
                t_prev, v_prev = t, v  # singular gap: restart the bracket
            elif np.sign(v) != np.sign(v_prev):
                root = _bisect_verified(
                    lambda tt: line_value(tt, direction), t_prev, t, v_prev)
                if root is not None:
                    first = seed + root * direction
                else:
                    t_prev, v_prev = t, v  # pole crossing, keep scanning
            else:
                t_prev, v_prev = t, v
            t += step
        if first is not None:
            break
    if first is None:
        raise ContinuationStalledError(
            f"no boundary bracket for index {k} within reach {reach}")

    def gradient(xi):
        h = max(1e-7, 1e-7 * float(np.linalg.norm(xi)))
        gx = s_at(xi + [h, 0.0], k)
        gx2 = s_at(xi - [h, 0.0], k)
        gy = s_at(xi + [0.0, h], k)
        gy2 = s_at(xi - [0.0, h], k)
        if None in (gx, gx2, gy, gy2):
            return None
        return np.array([(gx - gx2) / (2 * h), (gy - gy2) / (2 * h)])

    def correct(pred, normal):
        t = 0.0
        h = max(1e-9, 1e-6 * step)
        for _ in range(12):
            v = s_at(pred + t * normal, k)
            if v is None:
                return None, None
            if abs(v) <= options.corrector_tol:
                return pred + t * normal, abs(v)
            vp = s_at(pred + (t + h) * normal, k)
            if vp is None:
                return None, None
            deriv = (vp - v) / h
            if deriv == 0.0:
                return None, None
            t -= v / deriv
        v = s_at(pred + t * normal, k)
        if v is not None and abs(v) <= 1e-9:
            return pred + t * normal, abs(v)
        return None, None

    g0 = gradient(first)
    if g0 is None or np.linalg.norm(g0) == 0.0:
        raise ContinuationStalledError(f"gradient unavailable at start, index {k}")
    tangent0 = np.array([-g0[1], g0[0]]) / np.linalg.norm(g0)

    def walk(tangent):
        pts, res = [], []
        prev = first.copy()
        tan = tangent.copy()
        hit = False
        for _ in range(options.max_steps):
            pred = prev + step * tan
            if not in_box(pred):
                break
            normal = np.array([-tan[1], tan[0]])
            corrected, resid = correct(pred, normal)
            if corrected is None:
                hit = True
                break
            pts.append(corrected)
            res.append(resid)
            new_tan = corrected - prev
            norm = np.linalg.norm(new_tan)
            if norm == 0.0:
                break
            tan = new_tan / norm
            prev = corrected
        return pts, res, hit

    fwd_pts, fwd_res, fwd_hit = walk(tangent0)
    back_pts, back_res, back_hit = walk(-tangent0)
    points = back_pts[::-1] + [first] + fwd_pts
    residuals = back_res[::-1] + [abs(s_at(first, k) or 0.0)] + fwd_res
    return BoundaryCurve(index=k, points=np.asarray(points),
                         s_residuals=np.asarray(residuals),
                         hit_singularity=fwd_hit or back_hit)


def curves_to_csv(curves: dict[int, BoundaryCurve]) -> str:
    lines = ["curve_id,index,p1,p2,s_residual"]
    for cid, curve in enumerate(curves.values()):
        for i in range(curve.points.shape[0]):
            lines.append(f"{cid},{curve.index},{curve.points[i, 0]:.17g},"
                         f"{curve.points[i, 1]:.17g},{curve.s_residuals[i]:.17g}")
    return "\n".join(lines) + "\n"


@dataclass
class WidthProfile:
    arclength: np.ndarray
    width: np.ndarray
    midpoints: np.ndarray
    minima: list[int]
    candidates: np.ndarray   # (k, 2) midpoints at flagged minima, narrowest first


def _resample(points: np.ndarray, count: int) -> np.ndarray:
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        return np.repeat(points[:1], count, axis=0)
    target = np.linspace(0.0, s[-1], count)
    out = np.column_stack([np.interp(target, s, points[:, j])
                           for j in range(points.shape[1])])
    return out


def _point_to_polyline(p: np.ndarray, poly: np.ndarray) -> tuple[float, np.ndarray]:
    best = (float("inf"), poly[0])
    for i in range(poly.shape[0] - 1):
        a, b = poly[i], poly[i + 1]
        dv = b - a
        denom = float(dv @ dv)
        t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ dv / denom, 0.0, 1.0))
        q = a + t * dv
        dist = float(np.linalg.norm(p - q))
        if dist < best[0]:
            best = (dist, q)
    return best


def width_profile(curve_a: BoundaryCurve, curve_b: BoundaryCurve,
                  resample: int = 200,
                  threshold: float | None = None) -> WidthProfile:
    """Width of the strip between two boundary curves, plus its minima.

    Widths pair each arclength-resampled point of the first curve with
    its nearest point on the second.  Local minima (including the ends)
    below the threshold are flagged as shrinking-point candidates; with
    no threshold every local minimum is flagged.
    """
    a = _resample(curve_a.points, resample)
    s = np.concatenate([[0.0],
                        np.cumsum(np.linalg.norm(np.diff(a, axis=0), axis=1))])
    widths = np.empty(resample)
    mids = np.empty_like(a)
    for i in range(resample):
        dist, q = _point_to_polyline(a[i], curve_b.points)
        widths[i] = dist
        mids[i] = 0.5 * (a[i] + q)
    minima = []
    for i in range(resample):
        left = widths[i - 1] if i > 0 else float("inf")
        right = widths[i + 1] if i < resample - 1 else float("inf")
        if widths[i] < left and widths[i] < right:
            minima.append(i)
    if threshold is not None:
        minima = [i for i in minima if widths[i] <= threshold]
    order = sorted(minima, key=lambda i: widths[i])
    return WidthProfile(arclength=s, width=widths, midpoints=mids,
                        minima=minima, candidates=mids[order])
