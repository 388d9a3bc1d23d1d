"""Path variables, belief sets, configurations, and configuration validity.

A path variable for a node pair (X, Y) takes one of four mutually exclusive
values describing how the pair is connected in a DAG:

* ``FWD``  - a directed path X => Y exists,
* ``BWD``  - a directed path Y => X exists,
* ``COMMON`` - neither is an ancestor of the other but they share a common
  ancestor,
* ``NONE`` - none of the above (the pair is d-separated given the empty set).

A configuration assigns one value to every path variable of a belief set and
is uniquely determined by any DAG.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple

from .errors import ParseError, UnknownNode
from .graphs import Dag, ReachMatrix, _iter_bits

FWD, BWD, COMMON, NONE = 0, 1, 2, 3
VALUE_KEYS = ("fwd", "bwd", "common", "none")
VALUE_SYMBOLS = ("=>", "<=", "<~>", "</>")

Configuration = tuple[int, ...]


class PathVariable(NamedTuple):
    """The pair (x, y) whose connecting-path type the variable describes."""
    x: int
    y: int


@dataclass(frozen=True)
class BeliefDistribution:
    """Probabilities for the four path values of one variable."""

    fwd: float
    bwd: float
    common: float
    none: float

    def __post_init__(self):
        vals = self.as_tuple()
        if any(v < -1e-12 or v > 1 + 1e-12 for v in vals):
            raise ValueError(f"probabilities out of [0,1]: {vals}")
        if abs(sum(vals) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {sum(vals)!r}, not 1")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.fwd, self.bwd, self.common, self.none)

    def __getitem__(self, value: int) -> float:
        return self.as_tuple()[value]

    @staticmethod
    def from_tuple(vals) -> "BeliefDistribution":
        return BeliefDistribution(*(float(v) for v in vals))

    @staticmethod
    def uniform() -> "BeliefDistribution":
        return BeliefDistribution(0.25, 0.25, 0.25, 0.25)


def distribute_mass(on_values: Iterable[int], p: float,
                    reference: BeliefDistribution) -> BeliefDistribution:
    """Put mass ``p`` on ``on_values`` and ``1-p`` on the rest, each side
    split proportionally to ``reference``.

    This is how event-style beliefs ("causes", "associated with") and
    residual mass are turned into full four-value distributions.
    """
    on = frozenset(on_values)
    if not on or not 0.0 <= p <= 1.0:
        raise ValueError("need a nonempty value set and p in [0,1]")
    out = [0.0] * 4
    w_on = sum(reference[v] for v in on)
    w_off = sum(reference[v] for v in range(4) if v not in on)
    for v in range(4):
        if v in on:
            out[v] = p * (reference[v] / w_on) if w_on > 0 else p / len(on)
        else:
            out[v] = (1.0 - p) * (reference[v] / w_off) if w_off > 0 \
                else (1.0 - p) / (4 - len(on))
    return BeliefDistribution.from_tuple(out)


EVENT_VALUE_SETS = {
    "causes": frozenset({FWD}),
    "caused-by": frozenset({BWD}),
    "associated": frozenset({FWD, BWD, COMMON}),
    "not-associated": frozenset({NONE}),
}


@dataclass(frozen=True)
class PathBeliefSet:
    """Path variables with marginal belief distributions, in a fixed order.

    The variable order defines configuration digit order (first variable
    most significant).
    """

    variables: tuple[PathVariable, ...]
    distributions: tuple[BeliefDistribution, ...]
    node_names: tuple[str, ...] | None = None

    def __post_init__(self):
        variables = tuple(PathVariable(int(v[0]), int(v[1])) for v in self.variables)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "distributions", tuple(self.distributions))
        if len(variables) != len(self.distributions):
            raise ValueError("variables and distributions differ in length")
        seen = set()
        for v in variables:
            if v.x == v.y:
                raise ValueError(f"path variable on identical nodes {v.x}")
            key = (min(v.x, v.y), max(v.x, v.y))
            if key in seen:
                raise ValueError(f"duplicate path variable for pair {key}")
            seen.add(key)

    @property
    def n(self) -> int:
        return len(self.variables)

    def max_node(self) -> int:
        return max((max(v.x, v.y) for v in self.variables), default=-1)

    def variable_nodes(self) -> frozenset[int]:
        return frozenset(i for v in self.variables for i in v)

    def restrict(self, indices: Iterable[int]) -> "PathBeliefSet":
        idx = tuple(indices)
        return PathBeliefSet(tuple(self.variables[i] for i in idx),
                             tuple(self.distributions[i] for i in idx),
                             self.node_names)


def configuration_of(dag: Dag, closure: ReachMatrix,
                     beliefs: PathBeliefSet) -> Configuration:
    """The configuration realized by ``dag`` (one value per path variable)."""
    if beliefs.max_node() >= dag.node_count:
        raise UnknownNode(f"belief node {beliefs.max_node()} not in a "
                          f"{dag.node_count}-node graph")
    return configuration_from_closure(closure, beliefs)


def configuration_from_closure(closure: ReachMatrix,
                               beliefs: PathBeliefSet) -> Configuration:
    if beliefs.max_node() >= closure.node_count:
        raise UnknownNode(f"belief node {beliefs.max_node()} not in a "
                          f"{closure.node_count}-node graph")
    return tuple(_pair_value(closure, x, y) for x, y in beliefs.variables)


def _pair_value(closure: ReachMatrix, x: int, y: int) -> int:
    if closure.reaches(x, y):
        return FWD
    if closure.reaches(y, x):
        return BWD
    if closure.anc[x] & closure.anc[y]:
        return COMMON
    return NONE


def config_index(config: Configuration) -> int:
    """1-based mixed-radix index; first variable most significant."""
    idx = 0
    for v in config:
        idx = idx * 4 + v
    return idx + 1


def config_decode(index: int, n: int) -> Configuration:
    """Inverse of :func:`config_index`."""
    if not 1 <= index <= 4 ** n:
        raise ValueError(f"index {index} out of range for {n} variables")
    rem = index - 1
    out = []
    for _ in range(n):
        out.append(rem % 4)
        rem //= 4
    return tuple(reversed(out))


# ---------------------------------------------------------------------------
# Configuration validity.
#
# A configuration is checked by building an implication meta-graph over the
# belief nodes: an arc X->Y for each FWD assignment, Y->X for BWD, and a
# fresh latent L with L->X, L->Y for COMMON.  The transitive closure of this
# meta-graph yields every ancestry relation the configuration implies; a
# configuration is invalid iff some variable's assigned value contradicts an
# implied relation (cycle, implied ancestry under COMMON, or any implied
# connection under NONE).

def is_valid_configuration(beliefs: PathBeliefSet, config: Configuration) -> bool:
    if len(config) != beliefs.n:
        raise ValueError("configuration length does not match belief set")
    pairs = tuple((v.x, v.y) for v in beliefs.variables)
    return _valid_for_pairs(_canonical_pairs(pairs), tuple(config))


def _canonical_pairs(pairs: tuple[tuple[int, int], ...]) -> tuple[tuple[int, int], ...]:
    # Relabel nodes by first appearance so validity caches hit across belief
    # sets that share structure but not node labels.
    remap: dict[int, int] = {}
    out = []
    for x, y in pairs:
        for v in (x, y):
            if v not in remap:
                remap[v] = len(remap)
        out.append((remap[x], remap[y]))
    return tuple(out)


@lru_cache(maxsize=100_000)
def _valid_for_pairs(pairs: tuple[tuple[int, int], ...],
                     config: tuple[int, ...]) -> bool:
    n_real = max((max(p) for p in pairs), default=-1) + 1
    arcs: list[tuple[int, int]] = []
    total = n_real
    for (x, y), val in zip(pairs, config):
        if val == FWD:
            arcs.append((x, y))
        elif val == BWD:
            arcs.append((y, x))
        elif val == COMMON:
            latent = total
            total += 1
            arcs.append((latent, x))
            arcs.append((latent, y))
    desc = _closure_of_arcs(total, arcs)
    anc = [0] * total
    for u in range(total):
        for v in _iter_bits(desc[u]):
            anc[v] |= 1 << u
    for (x, y), val in zip(pairs, config):
        fwd = (desc[x] >> y) & 1
        bwd = (desc[y] >> x) & 1
        if val == FWD and bwd:
            return False
        if val == BWD and fwd:
            return False
        if val == COMMON and (fwd or bwd):
            return False
        if val == NONE and (fwd or bwd or (anc[x] & anc[y])):
            return False
    return True


def _closure_of_arcs(n: int, arcs: list[tuple[int, int]]) -> list[int]:
    # Bitset Floyd-Warshall; the arc set may be cyclic (that is exactly what
    # invalidity detection is for), so no DFS memoization here.
    desc = [0] * n
    for u, v in arcs:
        desc[u] |= 1 << v
    for k in range(n):
        dk = desc[k]
        bit = 1 << k
        for u in range(n):
            if desc[u] & bit:
                desc[u] |= dk
    return desc


_FLAG_CACHE: dict[tuple[tuple[int, int], ...], list[bool]] = {}


def valid_config_flags(beliefs: PathBeliefSet,
                       variable_indices: tuple[int, ...] | None = None) -> list[bool]:
    """Validity flag for every configuration of the given variables (all by
    default), in config-index order.

    Enumerated depth-first with pruning: implications only grow as variables
    are assigned, so an invalid prefix can never become valid again.
    """
    if variable_indices is None:
        variable_indices = tuple(range(beliefs.n))
    pairs = _canonical_pairs(tuple(
        (beliefs.variables[i].x, beliefs.variables[i].y) for i in variable_indices))
    cached = _FLAG_CACHE.get(pairs)
    if cached is not None:
        return list(cached)
    k = len(pairs)
    flags = [False] * (4 ** k)

    def rec(depth: int, prefix: tuple[int, ...]):
        if not _valid_for_pairs(pairs[:depth], prefix):
            return
        if depth == k:
            idx = 0
            for v in prefix:
                idx = idx * 4 + v
            flags[idx] = True
            return
        for val in range(4):
            rec(depth + 1, prefix + (val,))

    rec(0, ())
    _FLAG_CACHE[pairs] = flags
    return list(flags)


# ---------------------------------------------------------------------------
# Constraint graph and independent partition.

class ConstraintGraph(NamedTuple):
    """Undirected graph with one vertex per belief node, one edge per variable."""
    vertices: frozenset[int]
    edges: frozenset[tuple[int, int]]


def constraint_graph(beliefs: PathBeliefSet) -> ConstraintGraph:
    edges = frozenset((min(v.x, v.y), max(v.x, v.y)) for v in beliefs.variables)
    return ConstraintGraph(beliefs.variable_nodes(), edges)


def independent_partition(beliefs: PathBeliefSet) -> tuple[tuple[int, ...], ...]:
    """Variable indices grouped by connected component of the constraint graph.

    Parts share no nodes, so the uninformative configuration distribution
    factorizes over them.
    """
    parent: dict[int, int] = {}

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for v in beliefs.variables:
        parent.setdefault(v.x, v.x)
        parent.setdefault(v.y, v.y)
        union(v.x, v.y)
    groups: dict[int, list[int]] = {}
    for i, v in enumerate(beliefs.variables):
        groups.setdefault(find(v.x), []).append(i)
    parts = sorted((tuple(sorted(g)) for g in groups.values()), key=lambda t: t[0])
    return tuple(parts)


# ---------------------------------------------------------------------------
# Beliefs file: JSON array of {"from": name, "to": name, "p": {...}} entries.
# Event-style entries {"from", "to", "event", "p"} need a reference
# distribution to spread the complementary mass.

def load_beliefs(text: str, names: list[str] | None = None,
                 uninformative: BeliefDistribution | None = None) -> PathBeliefSet:
    """Parse a beliefs JSON document.

    ``names`` fixes node indices; otherwise nodes are indexed by first
    appearance.  ``uninformative`` is required for event-style entries.
    Raises ParseError with the offending entry's line number.
    """
    entries, lines = _decode_array(text)
    resolved = list(names) if names is not None else []
    index: dict[str, int] = {nm: i for i, nm in enumerate(resolved)}

    def node_id(nm: str, lineno: int) -> int:
        if nm not in index:
            if names is not None:
                raise ParseError(f"unknown node name {nm!r}", line=lineno)
            index[nm] = len(resolved)
            resolved.append(nm)
        return index[nm]

    variables = []
    dists = []
    for entry, lineno in zip(entries, lines):
        if not isinstance(entry, dict) or "from" not in entry or "to" not in entry:
            raise ParseError("belief entry needs 'from' and 'to'", line=lineno)
        x = node_id(str(entry["from"]), lineno)
        y = node_id(str(entry["to"]), lineno)
        if "event" in entry:
            event = str(entry["event"])
            if event not in EVENT_VALUE_SETS:
                raise ParseError(f"unknown event {event!r}; expected one of "
                                 f"{sorted(EVENT_VALUE_SETS)}", line=lineno)
            if uninformative is None:
                raise ParseError("event-style belief needs an uninformative "
                                 "reference distribution", line=lineno)
            p = entry.get("p")
            if not isinstance(p, (int, float)):
                raise ParseError("event-style 'p' must be a number", line=lineno)
            dist = distribute_mass(EVENT_VALUE_SETS[event], float(p), uninformative)
        else:
            p = entry.get("p")
            if not isinstance(p, dict) or set(p) != set(VALUE_KEYS):
                raise ParseError(f"'p' must be an object with keys {VALUE_KEYS}",
                                 line=lineno)
            vals = [float(p[k]) for k in VALUE_KEYS]
            if any(not math.isfinite(v) or v < 0 for v in vals):
                raise ParseError("probabilities must be finite and nonnegative",
                                 line=lineno)
            if abs(sum(vals) - 1.0) > 1e-9:
                raise ParseError(f"probabilities sum to {sum(vals)}, not 1",
                                 line=lineno)
            dist = BeliefDistribution.from_tuple(vals)
        variables.append(PathVariable(x, y))
        dists.append(dist)
    try:
        return PathBeliefSet(tuple(variables), tuple(dists), tuple(resolved))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def dump_beliefs(beliefs: PathBeliefSet) -> str:
    names = beliefs.node_names or tuple(
        f"V{i}" for i in range(beliefs.max_node() + 1))
    entries = []
    for var, dist in zip(beliefs.variables, beliefs.distributions):
        entries.append({
            "from": names[var.x],
            "to": names[var.y],
            "p": dict(zip(VALUE_KEYS, dist.as_tuple())),
        })
    return json.dumps(entries, indent=2) + "\n"


def _decode_array(text: str) -> tuple[list, list[int]]:
    """Decode a JSON array, keeping each element's starting line number."""
    decoder = json.JSONDecoder()
    i = _skip_ws(text, 0)
    if i >= len(text) or text[i] != "[":
        raise ParseError("expected a JSON array of belief entries",
                         line=text.count("\n", 0, i) + 1)
    i += 1
    items: list = []
    lines: list[int] = []
    i = _skip_ws(text, i)
    if i < len(text) and text[i] == "]":
        return items, lines
    while True:
        i = _skip_ws(text, i)
        lineno = text.count("\n", 0, i) + 1
        try:
            obj, i = decoder.raw_decode(text, i)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc
        items.append(obj)
        lines.append(lineno)
        i = _skip_ws(text, i)
        if i >= len(text):
            raise ParseError("unterminated belief array",
                             line=text.count("\n") + 1)
        if text[i] == ",":
            i += 1
            continue
        if text[i] == "]":
            return items, lines
        raise ParseError(f"unexpected character {text[i]!r} in belief array",
                         line=text.count("\n", 0, i) + 1)


def _skip_ws(text: str, i: int) -> int:
    while i < len(text) and text[i] in " \t\r\n":
        i += 1
    return i
