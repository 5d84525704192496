"""Mini-language frontend: single-loop programs with affine branching.

The accepted programs declare state variables with interval initializers,
then run one infinite loop whose body mixes affine assignments, input
acquisitions ``u = input(lo, hi);``, and arbitrarily nested
``if (affine < const)`` conditionals.  Parsing resolves every intermediate
assignment (aliases such as ``ox = x;`` included) into affine forms over
the previous-iteration state and the inputs, producing a guard tree whose
leaves each update the whole state at once.  Each root-to-leaf guard
conjunction becomes one polyhedral cell, so the cells partition the space
by construction: a ``<`` guard contributes a strict row on its then-branch
and the complementary weak row on its else-branch.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from pwqlyap.model import AffineLaw, Polyhedron, PwaSystem

__all__ = [
    "ParseError",
    "GuardNode",
    "Leaf",
    "LoopProgram",
    "parse",
    "to_pwa",
    "evaluate",
]


class ParseError(ValueError):
    """Source-level error, carrying 1-based line and column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


_KEYWORDS = {"while", "true", "if", "else", "in", "input"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>(//|\#)[^\n]*)
  | (?P<nl>\n)
  | (?P<num>(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|<|>|[=+\-*(){}\[\],;])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = match.lastgroup
        tok = match.group()
        if kind == "nl":
            line += 1
            col = 1
        else:
            if kind == "ident" and tok in _KEYWORDS:
                kind = "kw"
            if kind not in ("ws", "comment"):
                tokens.append(_Token(kind, tok, line, col))
            col += len(tok)
        pos = match.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Affine:
    """Affine form const + sum coeff[name] * name over base symbols."""

    __slots__ = ("const", "coeffs")

    def __init__(self, const: float = 0.0, coeffs: dict | None = None):
        self.const = const
        self.coeffs = coeffs or {}

    def __add__(self, other: "_Affine") -> "_Affine":
        coeffs = dict(self.coeffs)
        for name, c in other.coeffs.items():
            coeffs[name] = coeffs.get(name, 0.0) + c
        return _Affine(self.const + other.const, coeffs)

    def __sub__(self, other: "_Affine") -> "_Affine":
        return self + other.scaled(-1.0)

    def scaled(self, factor: float) -> "_Affine":
        return _Affine(self.const * factor,
                       {n: c * factor for n, c in self.coeffs.items()})

    @property
    def is_const(self) -> bool:
        return not self.coeffs


@dataclass(frozen=True)
class GuardNode:
    """Branch on an affine row: then-branch satisfies `lin . z (<|<=) c`,
    else-branch the exact complement (weak vs strict swapped)."""

    lin: np.ndarray
    c: float
    weak_then: bool
    then_branch: object
    else_branch: object


@dataclass(frozen=True)
class Leaf:
    """One affine update of the full state: x_next = M z + const,
    z = (x, u)."""

    M: np.ndarray
    const: np.ndarray


@dataclass(frozen=True)
class LoopProgram:
    """Parsed program: ordered state/input variables, per-state init
    intervals, per-input range bounds, and the resolved guard tree."""

    state_vars: tuple
    input_vars: tuple
    init_box: tuple
    input_ranges: tuple
    body: object

    @property
    def d(self) -> int:
        return len(self.state_vars)

    @property
    def m(self) -> int:
        return len(self.input_vars)

    def leaves(self) -> list:
        out = []

        def walk(node):
            if isinstance(node, Leaf):
                out.append(node)
            else:
                walk(node.then_branch)
                walk(node.else_branch)

        walk(self.body)
        return out


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    # -- token plumbing ----------------------------------------------------
    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, text: str, what: str | None = None) -> _Token:
        tok = self.next()
        if tok.text != text:
            shown = what or f"{text!r}"
            got = repr(tok.text) if tok.kind != "eof" else "end of input"
            raise ParseError(f"expected {shown}, got {got}", tok.line, tok.col)
        return tok

    def error(self, message: str, tok: _Token | None = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col)

    # -- grammar -----------------------------------------------------------
    def parse_program(self) -> "LoopProgram":
        state_vars: list = []
        init_box: list = []
        while self.peek().kind == "ident":
            name_tok = self.next()
            if name_tok.text in state_vars:
                self.error(f"state variable {name_tok.text!r} declared twice", name_tok)
            self.expect("in")
            lo, hi = self.parse_interval()
            self.expect(";")
            state_vars.append(name_tok.text)
            init_box.append((lo, hi))
        if not state_vars:
            self.error("expected at least one state declaration `name in [lo, hi];`")
        while_tok = self.expect("while")
        self.expect("(")
        self.expect("true")
        self.expect(")")
        body_stmts = self.parse_block()
        tok = self.peek()
        if tok.kind != "eof":
            self.error(f"unexpected {tok.text!r} after the loop body", tok)

        builder = _TreeBuilder(state_vars, while_tok)
        env = {name: _Affine(0.0, {name: 1.0}) for name in state_vars}
        body = builder.build(body_stmts, env, assigned=frozenset())
        d = len(state_vars)
        m = len(builder.input_vars)
        order = {name: k for k, name in enumerate(state_vars)}
        order.update({name: d + k for k, name in enumerate(builder.input_vars)})

        def vectorize(form: _Affine) -> np.ndarray:
            vec = np.zeros(d + m)
            for name, coeff in form.coeffs.items():
                vec[order[name]] = coeff
            return vec

        def finalize(node):
            if isinstance(node, _RawLeaf):
                M = np.vstack([vectorize(node.assigns[s]) for s in state_vars])
                const = np.array([node.assigns[s].const for s in state_vars])
                return Leaf(M=M, const=const)
            lin, c, weak_then = node.guard
            return GuardNode(lin=vectorize(lin), c=c - lin.const, weak_then=weak_then,
                             then_branch=finalize(node.then_branch),
                             else_branch=finalize(node.else_branch))

        return LoopProgram(state_vars=tuple(state_vars),
                           input_vars=tuple(builder.input_vars),
                           init_box=tuple(init_box),
                           input_ranges=tuple(builder.input_ranges),
                           body=finalize(body))

    def parse_interval(self) -> tuple:
        self.expect("[")
        lo = self.parse_signed_number()
        self.expect(",")
        hi = self.parse_signed_number()
        self.expect("]")
        if lo > hi:
            self.error(f"empty interval [{lo}, {hi}]")
        return lo, hi

    def parse_signed_number(self) -> float:
        sign = 1.0
        while self.peek().text in ("+", "-"):
            if self.next().text == "-":
                sign = -sign
        tok = self.next()
        if tok.kind != "num":
            self.error("expected a number", tok)
        return sign * float(tok.text)

    def parse_block(self) -> list:
        if self.peek().text == "{":
            self.next()
            stmts = []
            while self.peek().text != "}":
                if self.peek().kind == "eof":
                    self.error("unclosed block: expected '}'")
                stmts.append(self.parse_stmt())
            self.next()
            return stmts
        return [self.parse_stmt()]

    def parse_stmt(self):
        tok = self.peek()
        if tok.text == "if":
            self.next()
            self.expect("(")
            guard = self.parse_comparison()
            self.expect(")")
            then_blk = self.parse_block()
            else_blk = []
            if self.peek().text == "else":
                self.next()
                else_blk = self.parse_block()
            # Inputs must be read on every path with one shared range, so
            # input() may not sit inside a branch.  Nested branches were
            # checked when their own if-statement was built.
            for stmt in then_blk + else_blk:
                if stmt[0] == "input":
                    bad = stmt[4]
                    raise ParseError("input() must appear unconditionally, "
                                     "outside any branch", bad.line, bad.col)
            return ("if", guard, then_blk, else_blk, tok)
        if tok.kind == "ident":
            name = self.next()
            self.expect("=")
            if self.peek().text == "input":
                kw = self.next()
                self.expect("(")
                lo = self.parse_signed_number()
                self.expect(",")
                hi = self.parse_signed_number()
                self.expect(")")
                self.expect(";")
                if lo > hi:
                    self.error(f"empty input range [{lo}, {hi}]", kw)
                return ("input", name.text, lo, hi, name)
            expr = self.parse_affine()
            self.expect(";")
            return ("assign", name.text, expr, name)
        if tok.kind == "kw":
            self.error(f"unexpected keyword {tok.text!r}", tok)
        self.error(f"expected a statement, got {tok.text!r}" if tok.kind != "eof"
                   else "expected a statement, got end of input", tok)

    def parse_comparison(self) -> tuple:
        lhs_tok = self.peek()
        lhs = self.parse_affine()
        op_tok = self.next()
        if op_tok.text not in ("<", "<=", ">", ">="):
            self.error("expected a comparison operator (<, <=, >, >=)", op_tok)
        rhs = self.parse_affine()
        if op_tok.text in (">", ">="):
            lhs, rhs = rhs, lhs
            op = "<" if op_tok.text == ">" else "<="
        else:
            op = op_tok.text
        diff = lhs - rhs
        if diff.is_const:
            self.error("guard compares constants; it never branches", lhs_tok)
        lin = _Affine(0.0, dict(diff.coeffs))
        return (lin, -diff.const, op == "<=")

    # affine := term (('+'|'-') term)*
    def parse_affine(self) -> _Affine:
        expr = self.parse_term()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            term = self.parse_term()
            expr = expr + term if op == "+" else expr - term
        return expr

    # term := factor ('*' factor)*
    def parse_term(self) -> _Affine:
        expr = self.parse_factor()
        while self.peek().text == "*":
            star = self.next()
            rhs = self.parse_factor()
            if not expr.is_const and not rhs.is_const:
                self.error("non-affine expression: product of two non-constant terms", star)
            if expr.is_const:
                expr = rhs.scaled(expr.const)
            else:
                expr = expr.scaled(rhs.const)
        return expr

    def parse_factor(self) -> _Affine:
        tok = self.next()
        if tok.text == "-":
            return self.parse_factor().scaled(-1.0)
        if tok.text == "+":
            return self.parse_factor()
        if tok.kind == "num":
            return _Affine(float(tok.text))
        if tok.kind == "ident":
            return _Affine(0.0, {("ref", tok.text, tok.line, tok.col): 1.0})
        if tok.text == "(":
            expr = self.parse_affine()
            self.expect(")")
            return expr
        got = repr(tok.text) if tok.kind != "eof" else "end of input"
        raise ParseError(f"expected a number, variable, or '(', got {got}",
                         tok.line, tok.col)


@dataclass
class _RawNode:
    guard: tuple
    then_branch: object = None
    else_branch: object = None


@dataclass
class _RawLeaf:
    assigns: dict = field(default_factory=dict)


class _TreeBuilder:
    """Continuation-passing walk turning the statement list into a guard
    tree; every identifier is resolved through an environment of affine
    forms over previous-iteration state and inputs."""

    def __init__(self, state_vars: list, while_tok: _Token):
        self.state_vars = state_vars
        self.while_tok = while_tok
        self.input_vars: list = []
        self.input_ranges: list = []
        # Lexical position of each input read: the tree walk revisits the
        # same statement once per path, which must not count as a re-read.
        self.input_seen: dict = {}

    def resolve(self, form: _Affine, env: dict) -> _Affine:
        out = _Affine(form.const)
        for key, coeff in form.coeffs.items():
            _, name, line, col = key
            if name not in env:
                raise ParseError(f"unknown identifier {name!r}", line, col)
            out = out + env[name].scaled(coeff)
        return out

    def build(self, stmts: list, env: dict, assigned: frozenset):
        if not stmts:
            missing = [s for s in self.state_vars if s not in assigned]
            if missing:
                raise ParseError(
                    f"state variable(s) {', '.join(missing)} not assigned on some path "
                    f"through the loop body", self.while_tok.line, self.while_tok.col)
            return _RawLeaf(assigns={s: env[s] for s in self.state_vars})
        stmt, rest = stmts[0], stmts[1:]
        kind = stmt[0]
        if kind == "assign":
            _, name, expr, tok = stmt
            if name in self.input_vars:
                raise ParseError(f"{name!r} is an input variable; it cannot be assigned",
                                 tok.line, tok.col)
            if name in assigned:
                raise ParseError(f"state variable {name!r} assigned more than once "
                                 f"in one iteration", tok.line, tok.col)
            new_env = dict(env)
            new_env[name] = self.resolve(expr, env)
            new_assigned = assigned | {name} if name in self.state_vars else assigned
            return self.build(rest, new_env, new_assigned)
        if kind == "input":
            _, name, lo, hi, tok = stmt
            if name in self.state_vars:
                raise ParseError(f"{name!r} is a state variable; it cannot be an input",
                                 tok.line, tok.col)
            key = (tok.line, tok.col)
            if name in self.input_seen and self.input_seen[name] != key:
                raise ParseError(f"input {name!r} read twice in one iteration",
                                 tok.line, tok.col)
            if name not in self.input_seen:
                self.input_seen[name] = key
                self.input_vars.append(name)
                self.input_ranges.append((lo, hi))
            new_env = dict(env)
            new_env[name] = _Affine(0.0, {name: 1.0})
            return self.build(rest, new_env, assigned)
        # if-statement: both branches continue with the remaining statements.
        _, guard, then_blk, else_blk, _tok = stmt
        lin_raw, c, weak_then = guard
        lin = self.resolve(lin_raw, env)
        if lin.is_const:
            # Resolution can erase all variables (e.g. guard on x - x).
            raise ParseError("guard resolves to a constant; it never branches",
                             _tok.line, _tok.col)
        node = _RawNode(guard=(lin, c, weak_then))
        node.then_branch = self.build(then_blk + rest, dict(env), assigned)
        node.else_branch = self.build(else_blk + rest, dict(env), assigned)
        return node


def parse(text: str) -> LoopProgram:
    """Parse program text into a LoopProgram with resolved affine forms."""
    return _Parser(text).parse_program()


def _box_rows(pairs, dim: int, offset: int) -> tuple:
    """Weak rows var <= hi, -var <= -lo for each (lo, hi), in order."""
    T, c = [], []
    for k, (lo, hi) in enumerate(pairs):
        row = np.zeros(dim)
        row[offset + k] = 1.0
        T.append(row.copy())
        c.append(hi)
        T.append(-row + 0.0)
        c.append(-lo if lo != 0 else 0.0)
    if not T:
        return np.zeros((0, dim)), np.zeros(0)
    return np.vstack(T), np.array(c, dtype=float)


def to_pwa(program: LoopProgram) -> PwaSystem:
    """Translate the guard tree into cells and laws.

    Cells appear in depth-first then-branch-first order.  Every cell gets
    the input range bounds as trailing weak rows; the init polyhedron is
    the state init box crossed with the input ranges.
    """
    d, m = program.d, program.m
    dim = d + m
    input_T, input_c = _box_rows(program.input_ranges, dim, d)
    cells: list = []
    laws: list = []

    def walk(node, strict_rows, weak_rows):
        if isinstance(node, Leaf):
            Ts = np.vstack([r for r, _ in strict_rows]) if strict_rows else np.zeros((0, dim))
            cs = np.array([c for _, c in strict_rows], dtype=float)
            Tw_parts = [r for r, _ in weak_rows] + [input_T]
            cw_parts = [c for _, c in weak_rows] + list(input_c)
            Tw = np.vstack([np.atleast_2d(p) for p in Tw_parts]) if m or weak_rows \
                else np.zeros((0, dim))
            cw = np.array(cw_parts, dtype=float)
            cells.append(Polyhedron(Ts, cs, Tw, cw))
            laws.append(AffineLaw(node.M[:, :d], node.M[:, d:], node.const))
            return
        row, c = node.lin, node.c
        neg = (-row + 0.0, -c if c != 0 else 0.0)
        if node.weak_then:
            walk(node.then_branch, strict_rows, weak_rows + [(row, c)])
            walk(node.else_branch, strict_rows + [neg], weak_rows)
        else:
            walk(node.then_branch, strict_rows + [(row, c)], weak_rows)
            walk(node.else_branch, strict_rows, weak_rows + [neg])

    walk(program.body, [], [])

    init_state_T, init_state_c = _box_rows(program.init_box, dim, 0)
    init_T = np.vstack([init_state_T, input_T]) if m else init_state_T
    init_c = np.concatenate([init_state_c, input_c]) if m else init_state_c
    input_poly_T, input_poly_c = _box_rows(program.input_ranges, m, 0)
    return PwaSystem(
        d=d, m=m, cells=tuple(cells), laws=tuple(laws),
        input_polytope=Polyhedron(np.zeros((0, m)), np.zeros(0),
                                  input_poly_T, input_poly_c),
        init=Polyhedron(np.zeros((0, dim)), np.zeros(0), init_T, init_c),
    )


def evaluate(program: LoopProgram, x, u) -> np.ndarray:
    """One loop iteration by direct guard-tree interpretation."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.shape[0] != program.d or u.shape[0] != program.m:
        raise ValueError(f"point has shape ({x.shape[0]},{u.shape[0]}), "
                         f"expected ({program.d},{program.m})")
    z = np.concatenate([x, u])
    node = program.body
    while isinstance(node, GuardNode):
        val = float(node.lin @ z)
        taken = val <= node.c if node.weak_then else val < node.c
        node = node.then_branch if taken else node.else_branch
    return node.M @ z + node.const
