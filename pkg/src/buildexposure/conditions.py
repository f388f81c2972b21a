"""Presence conditions over configuration-option atoms.

A condition is an immutable formula tree.  Smart constructors (:func:`conj`,
:func:`disj`, :func:`neg`) keep formulas in a light normal form: constants
folded, nested And/Or flattened, children de-duplicated and sorted by their
canonical string, complementary literals detected.  Structural equality is
equality of the canonical string, which is also the serialization format::

    TRUE  FALSE  X  X=="v"  DEFINED(X)  OPAQUE#id  !c  (c && c)  (c || c)

Option names that are not plain identifiers are written ``@"json string"``.

Satisfiability and variant counting enumerate option values exhaustively,
with cofactoring so that constant sub-results cut the search short.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple

from .diagnostics import SourceSpan

DEFAULT_ATOM_CAP = 20
DEFAULT_CLAUSE_CAP = 64

_FALSE_CONSTANTS = frozenset({"", "0", "OFF", "NO", "FALSE", "N", "IGNORE", "NOTFOUND"})
_TRUE_CONSTANTS = frozenset({"1", "ON", "YES", "TRUE", "Y"})
_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


def is_false_constant(value: str) -> bool:
    upper = value.upper()
    return upper in _FALSE_CONSTANTS or upper.endswith("-NOTFOUND")


def cmake_truthy(value: str | None) -> bool:
    """Truthiness of a variable's value as ``if(<variable>)`` sees it."""
    return value is not None and not is_false_constant(value)


def constant_truth(text: str) -> bool | None:
    """Truth of ``if(<constant>)``; None when *text* is not a named constant."""
    upper = text.upper()
    if upper in _TRUE_CONSTANTS:
        return True
    if upper in _FALSE_CONSTANTS or upper.endswith("-NOTFOUND"):
        return False
    if _NUMBER.fullmatch(text):
        return float(text) != 0
    return None


# ---------------------------------------------------------------------------
# Formula tree
# ---------------------------------------------------------------------------

_PLAIN_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.+\-/]*|ENV\{[A-Za-z0-9_.+\-/]*\}")
_RESERVED = frozenset({"TRUE", "FALSE", "DEFINED"})


def _name_text(name: str) -> str:
    if _PLAIN_NAME.fullmatch(name) and name not in _RESERVED and not name.startswith("OPAQUE#"):
        return name
    return "@" + json.dumps(name)


class Condition:
    __slots__ = ("key", "_hash", "_atoms")

    def __init__(self, key: str) -> None:
        self.key = key
        self._hash = hash(key)
        self._atoms: frozenset[Atom] | None = None

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Condition) and self.key == other.key

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        return self.key

    def __repr__(self) -> str:
        return f"<Condition {self.key}>"

    def children(self) -> tuple[Condition, ...]:
        return ()

    @property
    def atoms(self) -> frozenset[Atom]:
        if self._atoms is None:
            found: set[Atom] = set()
            stack: list[Condition] = [self]
            while stack:
                node = stack.pop()
                if isinstance(node, Atom):
                    found.add(node)
                else:
                    stack.extend(node.children())
            self._atoms = frozenset(found)
        return self._atoms

    @property
    def option_names(self) -> frozenset[str]:
        return frozenset(a.option for a in self.atoms if a.option is not None)

    @property
    def has_opaque(self) -> bool:
        return any(isinstance(a, Opaque) for a in self.atoms)


class Const(Condition):
    __slots__ = ("value",)

    def __init__(self, value: bool) -> None:
        super().__init__("TRUE" if value else "FALSE")
        self.value = value


TRUE = Const(True)
FALSE = Const(False)


def const(value: bool) -> Const:
    return TRUE if value else FALSE


class Atom(Condition):
    __slots__ = ()
    option: str | None = None


class Truthy(Atom):
    """CMake truthiness of an option's value."""

    __slots__ = ("option",)

    def __init__(self, option: str) -> None:
        super().__init__(_name_text(option))
        self.option = option


class Equals(Atom):
    __slots__ = ("option", "literal")

    def __init__(self, option: str, literal: str) -> None:
        super().__init__(f"{_name_text(option)}=={json.dumps(literal)}")
        self.option = option
        self.literal = literal


class Defined(Atom):
    __slots__ = ("option",)

    def __init__(self, option: str) -> None:
        super().__init__(f"DEFINED({_name_text(option)})")
        self.option = option


class Opaque(Atom):
    """An undecidable predicate; both outcomes are always considered possible."""

    __slots__ = ("stable_id", "source_text", "span")
    option = None

    def __init__(self, stable_id: str, source_text: str = "", span: SourceSpan | None = None) -> None:
        super().__init__(f"OPAQUE#{stable_id}")
        self.stable_id = stable_id
        self.source_text = source_text
        self.span = span

    @classmethod
    def from_text(cls, source_text: str, span: SourceSpan | None = None) -> "Opaque":
        digest = hashlib.sha1(source_text.encode("utf-8", "surrogatepass")).hexdigest()[:10]
        return cls(digest, source_text, span)


class Not(Condition):
    __slots__ = ("child",)

    def __init__(self, child: Condition) -> None:
        super().__init__("!" + child.key)
        self.child = child

    def children(self) -> tuple[Condition, ...]:
        return (self.child,)


class _Junction(Condition):
    __slots__ = ("items",)
    joiner = ""

    def __init__(self, items: tuple[Condition, ...]) -> None:
        if len(items) < 2:
            raise ValueError("junctions need at least two children")
        super().__init__("(" + f" {self.joiner} ".join(c.key for c in items) + ")")
        self.items = items

    def children(self) -> tuple[Condition, ...]:
        return self.items


class And(_Junction):
    __slots__ = ()
    joiner = "&&"


class Or(_Junction):
    __slots__ = ()
    joiner = "||"


def neg(c: Condition) -> Condition:
    if isinstance(c, Const):
        return const(not c.value)
    if isinstance(c, Not):
        return c.child
    return Not(c)


def _junction(kind: type[_Junction], parts: Iterable[Condition]) -> Condition:
    absorbing, identity = (FALSE, TRUE) if kind is And else (TRUE, FALSE)
    dual = Or if kind is And else And
    flat: dict[str, Condition] = {}
    for part in parts:
        if part is absorbing or part == absorbing:
            return absorbing
        if part == identity:
            continue
        if isinstance(part, kind):
            for sub in part.items:
                flat[sub.key] = sub
        else:
            flat[part.key] = part
    for c in flat.values():
        if isinstance(c, Not) and c.child.key in flat:
            return absorbing
    # absorption: A && (A || B) -> A, and dually
    keys = flat.keys()
    kept = [
        c for c in flat.values()
        if not (isinstance(c, dual) and any(sub.key in keys for sub in c.items))
    ]
    if not kept:
        return identity
    if len(kept) == 1:
        return kept[0]
    kept.sort(key=lambda c: c.key)
    return kind(tuple(kept))


def conj(*parts: Condition) -> Condition:
    return _junction(And, parts)


def disj(*parts: Condition) -> Condition:
    return _junction(Or, parts)


def conj_all(parts: Iterable[Condition]) -> Condition:
    return _junction(And, parts)


def disj_all(parts: Iterable[Condition]) -> Condition:
    return _junction(Or, parts)


def substitute(c: Condition, fn: Callable[[Atom], Condition | None]) -> Condition:
    """Rebuild *c* replacing each atom for which *fn* returns a condition."""
    memo: dict[int, Condition] = {}

    def walk(node: Condition) -> Condition:
        hit = memo.get(id(node))
        if hit is not None:
            return hit
        if isinstance(node, Atom):
            repl = fn(node)
            out = node if repl is None else repl
        elif isinstance(node, Const):
            out = node
        elif isinstance(node, Not):
            out = neg(walk(node.child))
        elif isinstance(node, And):
            out = conj_all(walk(ch) for ch in node.items)
        else:
            out = disj_all(walk(ch) for ch in node.items)  # type: ignore[attr-defined]
        memo[id(node)] = out
        return out

    return walk(c)


def atom_holds(atom: Atom, value: str | None) -> bool:
    """Truth of an option atom when its option has concrete *value* (None: unset)."""
    if isinstance(atom, Truthy):
        return cmake_truthy(value)
    if isinstance(atom, Equals):
        # an unset option compares as its own name, which no literal we model matches
        return value is not None and value == atom.literal
    if isinstance(atom, Defined):
        return value is not None
    raise TypeError(f"no concrete value decides {atom.key}")


def restrict(c: Condition, option: str, value: str | None) -> Condition:
    """Cofactor of *c* with *option* fixed to *value*."""
    if option not in c.option_names:
        return c
    return substitute(c, lambda a: const(atom_holds(a, value)) if a.option == option else None)


def restrict_atom(c: Condition, atom: Atom, truth: bool) -> Condition:
    if atom not in c.atoms:
        return c
    return substitute(c, lambda a: const(truth) if a == atom else None)


# ---------------------------------------------------------------------------
# Canonical string parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<op>&&|\|\||!|\(|\))
      | (?P<defined>DEFINED\()
      | (?P<opaque>OPAQUE\#[A-Za-z0-9_\-]+)
      | (?P<quoted>@"(?:[^"\\]|\\.)*")
      | (?P<name>ENV\{[A-Za-z0-9_.+\-/]*\}|[A-Za-z_][A-Za-z0-9_.+\-/]*)
      | (?P<eq>==)
      | (?P<string>"(?:[^"\\]|\\.)*")
    )""",
    re.VERBOSE,
)


def parse_condition(text: str, opaque_atoms: Mapping[str, Opaque] | None = None) -> Condition:
    """Inverse of ``str(condition)``.  Raises ValueError on malformed input."""
    tokens: list[tuple[str, str]] = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"bad condition text at {pos}: {text!r}")
        kind = m.lastgroup
        assert kind is not None
        tokens.append((kind, m.group(kind)))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    opaque_atoms = opaque_atoms or {}
    index = 0

    def peek() -> tuple[str, str] | None:
        return tokens[index] if index < len(tokens) else None

    def take() -> tuple[str, str]:
        nonlocal index
        if index >= len(tokens):
            raise ValueError(f"unexpected end of condition: {text!r}")
        index += 1
        return tokens[index - 1]

    def option_name(tok: tuple[str, str]) -> str:
        kind, val = tok
        if kind == "name":
            return val
        if kind == "quoted":
            return json.loads(val[1:])
        raise ValueError(f"expected option name, got {val!r}")

    def primary() -> Condition:
        kind, val = take()
        if kind == "op" and val == "!":
            return neg(primary())
        if kind == "op" and val == "(":
            first = primary()
            parts = [first]
            joiner = None
            while True:
                k, v = take()
                if k == "op" and v == ")":
                    break
                if k != "op" or v not in ("&&", "||") or (joiner and v != joiner):
                    raise ValueError(f"bad junction in {text!r}")
                joiner = v
                parts.append(primary())
            if joiner is None:
                return first
            return conj_all(parts) if joiner == "&&" else disj_all(parts)
        if kind == "defined":
            name = option_name(take())
            if take() != ("op", ")"):
                raise ValueError(f"unterminated DEFINED in {text!r}")
            return Defined(name)
        if kind == "opaque":
            stable_id = val.split("#", 1)[1]
            known = opaque_atoms.get(stable_id)
            return known if known is not None else Opaque(stable_id)
        if kind in ("name", "quoted"):
            name = option_name((kind, val))
            if val in ("TRUE", "FALSE") and kind == "name":
                return const(val == "TRUE")
            nxt = peek()
            if nxt and nxt[0] == "eq":
                take()
                k2, lit = take()
                if k2 != "string":
                    raise ValueError(f"expected string literal in {text!r}")
                return Equals(name, json.loads(lit))
            return Truthy(name)
        raise ValueError(f"unexpected token {val!r} in {text!r}")

    result = primary()
    if index != len(tokens):
        raise ValueError(f"trailing tokens in condition {text!r}")
    return result


# ---------------------------------------------------------------------------
# Configuration options and assignments
# ---------------------------------------------------------------------------

BOOLEAN = "boolean"
ENUMERATED = "enumerated"
OPAQUE_DOMAIN = "opaque"

ORIGIN_OPTION = "option_command"
ORIGIN_CACHE = "cache_override"
ORIGIN_ENV = "environment"


@dataclass(frozen=True)
class ConfigOption:
    name: str
    domain: str = BOOLEAN
    values: tuple[str, ...] = ()
    default: str | None = None
    origin: str = ORIGIN_OPTION
    # when the default itself depends on configuration: condition for default ON
    default_guard: Condition | None = None

    def __post_init__(self) -> None:
        if self.domain == BOOLEAN and self.values not in ((), ("ON", "OFF")):
            raise ValueError("boolean options range over ON/OFF only")
        if self.domain == ENUMERATED:
            if not self.values:
                raise ValueError(f"enumerated option {self.name} has an empty domain")
            if len(set(self.values)) != len(self.values):
                raise ValueError(f"enumerated option {self.name} has duplicate values")

    def domain_values(self) -> tuple[str, ...]:
        if self.domain == BOOLEAN:
            return ("ON", "OFF")
        return self.values


@dataclass(frozen=True)
class ConfigurationAssignment:
    values: Mapping[str, str] = field(default_factory=dict)
    # unmapped options take their declared default (or are unset)
    total: bool = False

    def to_json(self) -> dict:
        return {"values": dict(sorted(self.values.items())), "total": self.total}


OptionSet = Mapping[str, ConfigOption] | Iterable[ConfigOption] | None


def option_map(options: OptionSet) -> Mapping[str, ConfigOption]:
    if options is None:
        return {}
    if isinstance(options, Mapping):
        return options
    return {o.name: o for o in options}


# ---------------------------------------------------------------------------
# Three-valued evaluation
# ---------------------------------------------------------------------------

_UNKNOWN = object()


def _value_of(name: str, assignment: ConfigurationAssignment,
              options: Mapping[str, ConfigOption], depth: int = 0) -> object:
    if name in assignment.values:
        return assignment.values[name]
    if not assignment.total:
        return _UNKNOWN
    opt = options.get(name)
    if opt is None:
        return None
    if opt.default_guard is not None and depth < 8:
        truth = _eval(opt.default_guard, assignment, options, depth + 1)
        if truth is None:
            return _UNKNOWN
        return "ON" if truth else "OFF"
    return opt.default


def _eval(c: Condition, assignment: ConfigurationAssignment,
          options: Mapping[str, ConfigOption], depth: int = 0) -> bool | None:
    if isinstance(c, Const):
        return c.value
    if isinstance(c, Opaque):
        return None
    if isinstance(c, Atom):
        assert c.option is not None
        value = _value_of(c.option, assignment, options, depth)
        if value is _UNKNOWN:
            return None
        return atom_holds(c, value)  # type: ignore[arg-type]
    if isinstance(c, Not):
        inner = _eval(c.child, assignment, options, depth)
        return None if inner is None else not inner
    is_and = isinstance(c, And)
    unknown = False
    for child in c.children():
        r = _eval(child, assignment, options, depth)
        if r is None:
            unknown = True
        elif r != is_and:
            return r
    return None if unknown else is_and


def evaluate(c: Condition, assignment: ConfigurationAssignment,
             options: OptionSet = None) -> bool | None:
    """Kleene evaluation: True, False, or None for unknown."""
    return _eval(c, assignment, option_map(options))


# ---------------------------------------------------------------------------
# Enumeration: satisfiability and variant counting
# ---------------------------------------------------------------------------

# stands for "any non-empty value other than the literals the formula mentions"
OTHER_VALUE = "\x00other"

Axis = tuple[str, tuple]


def _axes(c: Condition, options: Mapping[str, ConfigOption], atom_cap: int,
          universe: Iterable[str] = ()) -> tuple[tuple[Axis, ...], bool]:
    """Enumeration axes for the options of *c*; second item: within cap."""
    names = sorted(c.option_names | set(universe))
    within = len(names) <= atom_cap
    names = names[:atom_cap]
    by_name: dict[str, list[Atom]] = {}
    for a in c.atoms:
        if a.option is not None:
            by_name.setdefault(a.option, []).append(a)
    axes = []
    for name in names:
        opt = options.get(name)
        if opt is not None and opt.domain in (BOOLEAN, ENUMERATED):
            axes.append((name, opt.domain_values()))
            continue
        atoms = by_name.get(name, [])
        reps: list[str | None] = [""]
        reps.extend(sorted({a.literal for a in atoms if isinstance(a, Equals)} - {""}))
        reps.append(OTHER_VALUE)
        if any(isinstance(a, Defined) or (isinstance(a, Equals) and a.literal == "") for a in atoms):
            reps.append(None)
        axes.append((name, tuple(reps)))
    return tuple(axes), within


def _free_atoms(c: Condition) -> list[Atom]:
    return sorted(c.atoms, key=lambda a: a.key)


@lru_cache(maxsize=65536)
def _free_possible(c: Condition) -> bool:
    """Some valuation of the remaining atoms, taken as independent, satisfies c."""
    if isinstance(c, Const):
        return c.value
    atom = _free_atoms(c)[0]
    return _free_possible(restrict_atom(c, atom, True)) or _free_possible(restrict_atom(c, atom, False))


def _free_valid(c: Condition) -> bool:
    return not _free_possible(neg(c))


@lru_cache(maxsize=65536)
def _sat_search(c: Condition, axes: tuple[Axis, ...]) -> tuple[bool, bool]:
    """(exists known values s.t. c holds for all free atoms, exists at all)."""
    if isinstance(c, Const):
        return c.value, c.value
    names = c.option_names
    for i, (name, values) in enumerate(axes):
        if name in names:
            rest = axes[i + 1:]
            possible = False
            for v in values:
                sure, maybe = _sat_search(restrict(c, name, v), rest)
                if sure:
                    return True, True
                possible = possible or maybe
            return False, possible
    # only opaque / beyond-cap atoms remain
    return _free_valid(c), _free_possible(c)


def satisfiable(c: Condition, options: OptionSet = None,
                atom_cap: int = DEFAULT_ATOM_CAP) -> bool | None:
    """True / False, or None when opaque (or beyond-cap) atoms leave it open."""
    if atom_cap < 1:
        raise ValueError("atom_cap must be >= 1")
    if isinstance(c, Const):
        return c.value
    axes, _ = _axes(c, option_map(options), atom_cap)
    sure, maybe = _sat_search(c, axes)
    if sure:
        return True
    return None if maybe else False


class VariantCount(NamedTuple):
    count: int
    exact: bool


@lru_cache(maxsize=65536)
def _count(c: Condition, axes: tuple[Axis, ...]) -> int:
    if c == FALSE:
        return 0
    if not axes:
        return 1 if c == TRUE or _free_possible(c) else 0
    (name, values), rest = axes[0], axes[1:]
    if c == TRUE or name not in c.option_names:
        return len(values) * _count(c, rest)
    return sum(_count(restrict(c, name, v), rest) for v in values)


def count_variants(c: Condition, options: OptionSet = None,
                   atom_cap: int = DEFAULT_ATOM_CAP,
                   universe: Iterable[str] = ()) -> VariantCount:
    """Number of option-value combinations satisfying *c*.

    Only options appearing in *c* (plus any named in *universe*) span the
    space.  Options with an open string domain range over the equivalence
    classes of values the formula can tell apart.  Opaque and beyond-cap
    atoms are projected out existentially, which over-approximates; the
    count is then marked inexact.
    """
    if atom_cap < 1:
        raise ValueError("atom_cap must be >= 1")
    axes, within = _axes(c, option_map(options), atom_cap, universe)
    exact = within and not c.has_opaque
    return VariantCount(_count(c, axes), exact)


def total_assignments(c: Condition, options: OptionSet = None,
                      atom_cap: int = DEFAULT_ATOM_CAP) -> int:
    axes, _ = _axes(c, option_map(options), atom_cap)
    n = 1
    for _, values in axes:
        n *= len(values)
    return n


def enumerate_assignments(names: Iterable[str], options: OptionSet = None) -> Iterator[dict[str, str]]:
    """All total value combinations over *names* (boolean unless declared)."""
    opts = option_map(options)
    names = sorted(names)
    domains = [opts[n].domain_values() if n in opts and opts[n].domain != OPAQUE_DOMAIN
               else ("ON", "OFF") for n in names]
    for combo in product(*domains):
        yield dict(zip(names, combo))


def equivalent(a: Condition, b: Condition, options: OptionSet = None) -> bool | None:
    """Truth-table equivalence; None when opaque atoms make it undecidable."""
    differ = disj(conj(a, neg(b)), conj(neg(a), b))
    sat = satisfiable(differ, options, atom_cap=max(DEFAULT_ATOM_CAP, len(differ.option_names)))
    return None if sat is None else not sat


# ---------------------------------------------------------------------------
# Disjunctive normal form
# ---------------------------------------------------------------------------

Literal = tuple[Atom, bool]
Clause = frozenset[Literal]


class DnfOverflow:
    """Returned by :func:`to_dnf` when the clause cap would be exceeded."""

    _instance: "DnfOverflow | None" = None

    def __new__(cls) -> "DnfOverflow":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "OVERFLOW"


OVERFLOW = DnfOverflow()


def _clause_key(clause: Clause) -> tuple[str, ...]:
    return tuple(sorted(("!" if not pos else "") + a.key for a, pos in clause))


@dataclass(frozen=True)
class DNF:
    clauses: tuple[Clause, ...]

    def to_condition(self) -> Condition:
        return disj_all(
            conj_all(a if pos else neg(a) for a, pos in clause) for clause in self.clauses
        )

    def __len__(self) -> int:
        return len(self.clauses)


class _Overflow(Exception):
    pass


def _consistent(clause: Clause) -> bool:
    return not any((a, not pos) in clause for a, pos in clause)


def _reduce(clauses: Iterable[Clause]) -> list[Clause]:
    """Drop duplicate and subsumed clauses."""
    unique = sorted(set(clauses), key=lambda cl: (len(cl), _clause_key(cl)))
    kept: list[Clause] = []
    for cl in unique:
        if not any(k <= cl for k in kept):
            kept.append(cl)
    return kept


def _dnf(c: Condition, positive: bool, cap: int) -> list[Clause]:
    if isinstance(c, Const):
        return [frozenset()] if c.value == positive else []
    if isinstance(c, Atom):
        return [frozenset({(c, positive)})]
    if isinstance(c, Not):
        return _dnf(c.child, not positive, cap)
    is_and = isinstance(c, And) == positive
    parts = [_dnf(ch, positive, cap) for ch in c.children()]
    if not is_and:
        merged = _reduce(cl for part in parts for cl in part)
        if len(merged) > cap:
            raise _Overflow
        return merged
    acc: list[Clause] = [frozenset()]
    for part in parts:
        nxt = []
        for left in acc:
            for right in part:
                combined = left | right
                if _consistent(combined):
                    nxt.append(combined)
        acc = _reduce(nxt)
        if len(acc) > cap:
            raise _Overflow
        if not acc:
            return []
    return acc


def to_dnf(c: Condition, clause_cap: int = DEFAULT_CLAUSE_CAP) -> DNF | DnfOverflow:
    if clause_cap < 1:
        raise ValueError("clause_cap must be >= 1")
    try:
        clauses = _dnf(c, True, clause_cap)
    except _Overflow:
        return OVERFLOW
    return DNF(tuple(sorted(clauses, key=_clause_key)))


def _merge_pass(clauses: list[Clause]) -> list[Clause]:
    """Combine clauses that differ only in the polarity of one literal."""
    changed = True
    while changed:
        changed = False
        seen = set(clauses)
        for i, a in enumerate(clauses):
            for b in clauses[i + 1:]:
                if len(a) != len(b):
                    continue
                diff = a ^ b
                if len(diff) == 2:
                    (x, px), (y, py) = diff
                    if x == y and px != py:
                        merged = a - diff
                        if merged not in seen:
                            clauses = _reduce([*clauses, merged])
                            changed = True
                            break
            if changed:
                break
    return clauses


def simplify(c: Condition, options: OptionSet = None,
             clause_cap: int = DEFAULT_CLAUSE_CAP) -> Condition:
    """Best-effort reduction to a small DNF; falls back to *c* on overflow."""
    if isinstance(c, (Const, Atom)):
        return c
    dnf = to_dnf(c, clause_cap)
    if isinstance(dnf, DnfOverflow):
        return c
    result = DNF(tuple(sorted(_merge_pass(list(dnf.clauses)), key=_clause_key))).to_condition()
    if isinstance(result, Const):
        return result
    if len(result.option_names) <= DEFAULT_ATOM_CAP:
        if satisfiable(neg(result), options) is False:
            return TRUE
        if satisfiable(result, options) is False:
            return FALSE
    return result
