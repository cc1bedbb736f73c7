"""LTL over finite traces: formula syntax, text/JSON forms, evaluation.

Text form is prefix notation with compound operands parenthesized::

    G (not collision)
    U p (X q)
    and (F p) (G (not q))

Semantics are the usual finite-trace ones with a *strong* next: ``X f`` is
false at the last position. ``F``/``G``/``U`` quantify over the remaining
positions of the trace.
"""
from __future__ import annotations

import json
import re


class Formula:
    __slots__ = ("text", "_hash")
    op = ""

    def _init(self, text: str):
        self.text = text
        self._hash = hash(text)

    @property
    def args(self) -> tuple["Formula", ...]:
        return ()

    def __eq__(self, other):
        return isinstance(other, Formula) and self.text == other.text

    def __hash__(self):
        return self._hash

    def __lt__(self, other):
        return self.text < other.text

    def __str__(self):
        return self.text

    def __repr__(self):
        return f"<{self.text}>"

    def subformulas(self) -> dict["Formula", None]:
        """Distinct subformulas, children before parents."""
        seen: dict[Formula, None] = {}
        stack = [(self, False)]
        while stack:
            f, expanded = stack.pop()
            if f in seen:
                continue
            if expanded or not f.args:
                seen[f] = None
            else:
                stack.append((f, True))
                stack.extend((a, False) for a in reversed(f.args))
        return seen

    def size(self) -> int:
        """Number of syntax-DAG nodes (distinct subformulas)."""
        return len(self.subformulas())

    def atoms(self) -> set[str]:
        return {f.name for f in self.subformulas() if isinstance(f, Atom)}

    def to_json(self) -> dict:
        if isinstance(self, Atom):
            return {"op": "atom", "name": self.name}
        if not self.args:
            return {"op": self.op}
        return {"op": self.op, "args": [a.to_json() for a in self.args]}


def _wrap(f: Formula) -> str:
    return f.text if not f.args else f"({f.text})"


class Const(Formula):
    __slots__ = ("value",)

    def __init__(self, value: bool):
        self.value = bool(value)
        self._init("true" if value else "false")

    @property
    def op(self):
        return self.text


class Nonempty(Formula):
    """Progression-only constant: true on any nonempty remainder, false at trace end."""

    __slots__ = ()
    op = "nonempty"

    def __init__(self):
        self._init("nonempty")


class Atom(Formula):
    __slots__ = ("name",)
    op = "atom"

    def __init__(self, name: str):
        self.name = name
        self._init(name)


class _Unary(Formula):
    __slots__ = ("arg",)

    def __init__(self, arg: Formula):
        self.arg = arg
        self._init(f"{self.op} {_wrap(arg)}")

    @property
    def args(self):
        return (self.arg,)


class Not(_Unary):
    __slots__ = ()
    op = "not"


class Next(_Unary):
    __slots__ = ()
    op = "X"


class Finally(_Unary):
    __slots__ = ()
    op = "F"


class Globally(_Unary):
    __slots__ = ()
    op = "G"


class Until(Formula):
    __slots__ = ("left", "right")
    op = "U"

    def __init__(self, left: Formula, right: Formula):
        self.left = left
        self.right = right
        self._init(f"U {_wrap(left)} {_wrap(right)}")

    @property
    def args(self):
        return (self.left, self.right)


class _Nary(Formula):
    __slots__ = ("_args",)

    def __init__(self, args):
        args = tuple(args)
        if len(args) < 2:
            raise ValueError(f"{self.op} needs at least two operands")
        self._args = args
        self._init(self.op + " " + " ".join(_wrap(a) for a in args))

    @property
    def args(self):
        return self._args


class And(_Nary):
    __slots__ = ()
    op = "and"


class Or(_Nary):
    __slots__ = ()
    op = "or"


TRUE = Const(True)
FALSE = Const(False)
NONEMPTY = Nonempty()

UNARY = {"not": Not, "X": Next, "F": Finally, "G": Globally}
KEYWORDS = set(UNARY) | {"and", "or", "U", "implies", "true", "false", "nonempty"}


def implies(a: Formula, b: Formula) -> Formula:
    return Or((Not(a), b))


# --------------------------------------------------------------------------
# text and JSON forms

_TOK = re.compile(r"\s*(\(|\)|[A-Za-z_][A-Za-z0-9_]*)")


class FormulaSyntaxError(ValueError):
    pass


def parse_formula(text: str) -> Formula:
    toks = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOK.match(text, pos)
        if not m:
            raise FormulaSyntaxError(f"unexpected input at offset {pos}: {text[pos:pos + 10]!r}")
        toks.append(m.group(1))
        pos = m.end()
    i = 0

    def peek():
        return toks[i] if i < len(toks) else None

    def take():
        nonlocal i
        if i >= len(toks):
            raise FormulaSyntaxError("unexpected end of formula")
        i += 1
        return toks[i - 1]

    def operand():
        t = take()
        if t == "(":
            f = expr()
            if take() != ")":
                raise FormulaSyntaxError("expected ')'")
            return f
        if t in UNARY:
            return UNARY[t](operand())
        if t == "true":
            return TRUE
        if t == "false":
            return FALSE
        if t == "nonempty":
            return NONEMPTY
        if t in KEYWORDS or t == ")":
            raise FormulaSyntaxError(f"unexpected {t!r}; parenthesize compound operands")
        return Atom(t)

    def expr():
        t = peek()
        if t in ("and", "or"):
            take()
            args = [operand()]
            while peek() not in (None, ")"):
                args.append(operand())
            return (And if t == "and" else Or)(args)
        if t in ("U", "implies"):
            take()
            a, b = operand(), operand()
            return Until(a, b) if t == "U" else implies(a, b)
        return operand()

    f = expr()
    if i != len(toks):
        raise FormulaSyntaxError(f"trailing input: {' '.join(toks[i:])}")
    return f


def formula_from_json(d: dict) -> Formula:
    op = d["op"]
    if op == "atom":
        return Atom(d["name"])
    if op in ("true", "false"):
        return Const(op == "true")
    if op == "nonempty":
        return NONEMPTY
    args = [formula_from_json(a) for a in d["args"]]
    if op in UNARY:
        return UNARY[op](*args)
    if op == "U":
        return Until(*args)
    if op in ("and", "or"):
        return (And if op == "and" else Or)(args)
    raise ValueError(f"unknown operator {op!r}")


def load_formula(path) -> Formula:
    """Read a formula from JSON (``{"formula": {...}}``, a bare AST) or prefix text."""
    with open(path, encoding="utf-8") as fh:
        raw = fh.read()
    try:
        d = json.loads(raw)
    except json.JSONDecodeError:
        return parse_formula(raw)
    if isinstance(d, str):
        return parse_formula(d)
    if "formula" in d:
        d = d["formula"]
        return parse_formula(d) if isinstance(d, str) else formula_from_json(d)
    return formula_from_json(d)


# --------------------------------------------------------------------------
# evaluation


def truth_table(f: Formula, letters, predicates) -> dict[Formula, list[bool]]:
    """Truth value of every subformula at every position of the letter sequence."""
    n = len(letters)
    index = {name: k for k, name in enumerate(predicates)}
    table: dict[Formula, list[bool]] = {}
    for g in f.subformulas():
        if isinstance(g, Atom):
            b = index[g.name]
            vec = [bool(x >> b & 1) for x in letters]
        elif isinstance(g, Const):
            vec = [g.value] * n
        elif isinstance(g, Nonempty):
            vec = [True] * n
        elif isinstance(g, Not):
            vec = [not v for v in table[g.arg]]
        elif isinstance(g, And):
            cols = [table[a] for a in g.args]
            vec = [all(c[i] for c in cols) for i in range(n)]
        elif isinstance(g, Or):
            cols = [table[a] for a in g.args]
            vec = [any(c[i] for c in cols) for i in range(n)]
        elif isinstance(g, Next):
            a = table[g.arg]
            vec = a[1:] + [False]
        else:
            vec = [False] * n
            acc = None
            for i in range(n - 1, -1, -1):
                if isinstance(g, Finally):
                    acc = table[g.arg][i] or (i < n - 1 and acc)
                elif isinstance(g, Globally):
                    acc = table[g.arg][i] and (i == n - 1 or acc)
                elif isinstance(g, Until):
                    acc = table[g.right][i] or (table[g.left][i] and i < n - 1 and acc)
                else:
                    raise TypeError(f"cannot evaluate {g!r}")
                vec[i] = bool(acc)
        table[g] = vec
    return table


def eval_ltlf(f: Formula, t, i: int = 0) -> bool:
    """Truth of ``f`` at position ``i`` of labeled trace ``t``."""
    if not 0 <= i < len(t.letters):
        raise IndexError(f"position {i} outside trace of length {len(t.letters)}")
    return truth_table(f, t.letters, t.predicates)[f][i]
