"""Discrete Bayesian networks: JSON model files, CSV datasets, sampling.

The network file is a JSON object with a ``variables`` array; each entry
carries ``name``, ``states`` (list of state names, or an integer arity),
``parents`` (names, order significant) and a flat ``cpt``.  CPT layout: one
row per parent configuration, rows indexed mixed-radix with the
first-listed parent most significant, each row listing child-state
probabilities in state order.

Datasets are CSV with a header row and integer state indices; a dataset is
complete (no missing cells) by construction.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (BadDimensions, NonInteger, ParseError, RaggedRow,
                     RowNotNormalized, ValueOutOfRange)
from .graphs import Dag

_ROW_TOL = 1e-9


@dataclass(frozen=True)
class FamilyCounts:
    """Joint counts N[j, k] of one child (arity r) against its parents'
    configurations (q rows, mixed-radix with first parent most
    significant)."""

    child_arity: int
    parent_arities: tuple[int, ...]
    njk: np.ndarray  # shape (q, r), nonnegative ints

    @property
    def q(self) -> int:
        return int(self.njk.shape[0])

    def nij(self) -> np.ndarray:
        return self.njk.sum(axis=1)


@dataclass(frozen=True)
class Dataset:
    names: tuple[str, ...]
    arities: tuple[int, ...]
    rows: np.ndarray  # (m, k) integer state indices

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[1] != len(self.names):
            raise BadDimensions("rows must be (m, number-of-variables)")
        if len(self.arities) != len(self.names):
            raise BadDimensions("arities must match variable count")
        object.__setattr__(self, "rows", rows)
        if rows.size:
            if rows.min() < 0:
                raise ValueOutOfRange("negative state index")
            over = rows.max(axis=0) >= np.asarray(self.arities)
            if over.any():
                bad = self.names[int(np.argmax(over))]
                raise ValueOutOfRange(f"column {bad!r} exceeds its arity")

    @property
    def row_count(self) -> int:
        return int(self.rows.shape[0])

    def head(self, m: int) -> "Dataset":
        return Dataset(self.names, self.arities, self.rows[:m])


def family_counts(dataset: Dataset, child: int, parents) -> FamilyCounts:
    """Single-pass family count table for ``child`` given ``parents``."""
    parents = tuple(parents)
    r = dataset.arities[child]
    par_ar = tuple(dataset.arities[p] for p in parents)
    q = 1
    for a in par_ar:
        q *= a
    rows = dataset.rows
    if rows.shape[0] == 0:
        return FamilyCounts(r, par_ar, np.zeros((q, r), dtype=np.int64))
    idx = np.zeros(rows.shape[0], dtype=np.int64)
    for p in parents:
        idx = idx * dataset.arities[p] + rows[:, p]
    flat = idx * r + rows[:, child]
    njk = np.bincount(flat, minlength=q * r).reshape(q, r)
    return FamilyCounts(r, par_ar, njk)


@dataclass(frozen=True, eq=False)
class DiscreteBayesNet:
    dag: Dag
    arities: tuple[int, ...]
    parent_lists: tuple[tuple[int, ...], ...]
    cpts: tuple[np.ndarray, ...]
    state_names: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        n = self.dag.node_count
        if len(self.arities) != n or len(self.parent_lists) != n \
                or len(self.cpts) != n:
            raise BadDimensions("per-node fields must match node count")
        names = self.dag.names()
        for v in range(n):
            plist = self.parent_lists[v]
            if frozenset(plist) != self.dag.parents(v):
                raise BadDimensions(f"parent list of {names[v]!r} does not "
                                    "match the graph")
            q = 1
            for p in plist:
                q *= self.arities[p]
            cpt = np.asarray(self.cpts[v], dtype=float)
            if cpt.shape != (q, self.arities[v]):
                raise BadDimensions(
                    f"cpt of {names[v]!r} has shape {cpt.shape}, "
                    f"expected {(q, self.arities[v])}")
            sums = cpt.sum(axis=1)
            bad = np.where(np.abs(sums - 1.0) > _ROW_TOL)[0]
            if bad.size:
                raise RowNotNormalized(
                    f"cpt row {int(bad[0])} of {names[v]!r} sums to "
                    f"{sums[bad[0]]!r}")
            if (cpt < 0).any():
                raise RowNotNormalized(f"cpt of {names[v]!r} has negative entries")

    def __eq__(self, other):
        if not isinstance(other, DiscreteBayesNet):
            return NotImplemented
        return (self.dag == other.dag and self.arities == other.arities
                and self.parent_lists == other.parent_lists
                and self.state_names == other.state_names
                and all(np.array_equal(a, b) for a, b in zip(self.cpts, other.cpts)))

    def names(self) -> tuple[str, ...]:
        return self.dag.names()


def parse_network(text: str) -> DiscreteBayesNet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("variables"), list):
        raise ParseError("network file must be an object with a 'variables' array")
    entries = doc["variables"]
    names = []
    for e in entries:
        if not isinstance(e, dict) or "name" not in e:
            raise ParseError("every variable needs a 'name'")
        names.append(str(e["name"]))
    if len(set(names)) != len(names):
        raise ParseError("duplicate variable names")
    index = {nm: i for i, nm in enumerate(names)}
    arities = []
    state_names = []
    parent_lists = []
    cpts = []
    edges = set()
    for e in entries:
        states = e.get("states")
        if isinstance(states, int):
            if states < 1:
                raise BadDimensions(f"{e['name']!r}: arity must be >= 1")
            arities.append(states)
            state_names.append(tuple(f"s{i}" for i in range(states)))
        elif isinstance(states, list) and states:
            arities.append(len(states))
            state_names.append(tuple(str(s) for s in states))
        else:
            raise ParseError(f"{e['name']!r}: 'states' must be an arity or a "
                             "nonempty list of state names")
        plist = []
        for pname in e.get("parents", []):
            if str(pname) not in index:
                raise ParseError(f"{e['name']!r}: unknown parent {pname!r}")
            plist.append(index[str(pname)])
        if len(set(plist)) != len(plist):
            raise ParseError(f"{e['name']!r}: duplicate parent")
        parent_lists.append(tuple(plist))
        edges.update((p, index[str(e["name"])]) for p in plist)
        cpt = e.get("cpt")
        if not isinstance(cpt, list):
            raise ParseError(f"{e['name']!r}: 'cpt' must be a flat array")
        cpts.append(cpt)
    dag = Dag(len(names), frozenset(edges), tuple(names))
    shaped = []
    for v, flat in enumerate(cpts):
        q = 1
        for p in parent_lists[v]:
            q *= arities[p]
        if len(flat) != q * arities[v]:
            raise BadDimensions(
                f"cpt of {names[v]!r} has {len(flat)} entries, expected "
                f"{q * arities[v]}")
        shaped.append(np.array(flat, dtype=float).reshape(q, arities[v]))
    return DiscreteBayesNet(dag, tuple(arities), tuple(parent_lists),
                            tuple(shaped), tuple(state_names))


def serialize_network(net: DiscreteBayesNet) -> str:
    names = net.names()
    variables = []
    for v in range(net.dag.node_count):
        states: object
        if net.state_names is not None:
            states = list(net.state_names[v])
        else:
            states = net.arities[v]
        variables.append({
            "name": names[v],
            "states": states,
            "parents": [names[p] for p in net.parent_lists[v]],
            "cpt": [float(x) for x in np.asarray(net.cpts[v]).reshape(-1)],
        })
    return json.dumps({"variables": variables}, indent=2) + "\n"


def forward_sample(net: DiscreteBayesNet, m: int,
                   rng: np.random.Generator) -> Dataset:
    """Draw m independent rows, each node sampled in topological order from
    its CPT row given the already-sampled parents."""
    n = net.dag.node_count
    data = np.zeros((m, n), dtype=np.int64)
    for v in net.dag.topological_order():
        plist = net.parent_lists[v]
        if plist:
            idx = np.zeros(m, dtype=np.int64)
            for p in plist:
                idx = idx * net.arities[p] + data[:, p]
        else:
            idx = np.zeros(m, dtype=np.int64)
        probs = net.cpts[v][idx]              # (m, r)
        cum = np.cumsum(probs, axis=1)
        u = rng.random((m, 1))
        states = (u > cum).sum(axis=1)
        data[:, v] = np.minimum(states, net.arities[v] - 1)
    return Dataset(net.names(), net.arities, data)


def random_cpts_gamma(structure: Dag, arity_choices=(3, 4), shape: float = 0.5,
                      scale: float = 1.0,
                      rng: np.random.Generator | None = None) -> DiscreteBayesNet:
    """Attach random CPTs: per-node arity drawn from ``arity_choices``, every
    CPT row independent Gamma(shape, scale) draws normalized to sum one."""
    if shape <= 0 or scale <= 0:
        raise ValueError("gamma shape and scale must be positive")
    if rng is None:
        rng = np.random.default_rng(0)
    n = structure.node_count
    arities = tuple(int(a) for a in rng.choice(np.asarray(arity_choices), size=n))
    parent_lists = tuple(tuple(sorted(structure.parents(v))) for v in range(n))
    cpts = []
    for v in range(n):
        q = 1
        for p in parent_lists[v]:
            q *= arities[p]
        raw = rng.gamma(shape, scale, size=(q, arities[v]))
        raw = np.maximum(raw, 1e-300)
        cpts.append(raw / raw.sum(axis=1, keepdims=True))
    return DiscreteBayesNet(structure, arities, parent_lists, tuple(cpts))


def random_dag(n: int, avg_degree: float = 1.8, max_parents: int = 3,
               rng: np.random.Generator | None = None,
               node_names: tuple[str, ...] | None = None) -> Dag:
    """Random sparse DAG for synthetic truth networks: a random topological
    order with each forward pair kept with probability avg_degree/(n-1),
    children capped at ``max_parents`` parents."""
    if rng is None:
        rng = np.random.default_rng(0)
    order = rng.permutation(n)
    p = min(1.0, avg_degree / max(1, n - 1))
    edges = []
    n_parents = [0] * n
    for j in range(1, n):
        child = int(order[j])
        for i in range(j):
            if n_parents[child] >= max_parents:
                break
            if rng.random() < p:
                edges.append((int(order[i]), child))
                n_parents[child] += 1
    return Dag(n, frozenset(edges), node_names)


# ---------------------------------------------------------------------------
# Dataset CSV.

def parse_dataset(text: str, arities: tuple[int, ...] | None = None) -> Dataset:
    """CSV with a header row and integer state indices.  Arities are
    inferred as max value + 1 per column unless declared."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("dataset is empty; a header row is required") from None
    names = tuple(h.strip() for h in header)
    if any(not nm for nm in names) or len(set(names)) != len(names):
        raise ParseError("header must hold distinct nonempty names")
    k = len(names)
    rows = []
    for lineno, cells in enumerate(reader, start=2):
        if not cells:
            continue
        if len(cells) != k:
            raise RaggedRow(f"line {lineno}: expected {k} cells, got {len(cells)}")
        parsed = []
        for col, cell in enumerate(cells):
            cell = cell.strip()
            try:
                value = int(cell)
            except ValueError:
                raise NonInteger(
                    f"line {lineno}, column {names[col]!r}: {cell!r}") from None
            if value < 0:
                raise ValueOutOfRange(f"line {lineno}: negative state {value}")
            parsed.append(value)
        rows.append(parsed)
    data = np.array(rows, dtype=np.int64) if rows else np.zeros((0, k), np.int64)
    if arities is None:
        if data.size:
            arities = tuple(int(v) + 1 for v in data.max(axis=0))
        else:
            arities = (1,) * k
    else:
        arities = tuple(int(a) for a in arities)
        if data.size:
            over = data.max(axis=0) >= np.asarray(arities)
            if over.any():
                bad = names[int(np.argmax(over))]
                raise ValueOutOfRange(f"column {bad!r} exceeds declared arity")
    return Dataset(names, arities, data)


def serialize_dataset(ds: Dataset) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ds.names)
    writer.writerows(ds.rows.tolist())
    return out.getvalue()
