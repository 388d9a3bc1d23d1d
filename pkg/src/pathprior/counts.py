"""Exact DAG counting, uniform DAG sampling, and uninformative-prior tables.

The number of labeled DAGs on n nodes follows the classic alternating
recurrence

    R(n) = sum_{k=1..n} (-1)^(k+1) C(n,k) 2^(k(n-k)) R(n-k),   R(0) = 1.

Uniform sampling and exhaustive enumeration both use the outpoint
decomposition: every DAG has a unique nonempty set of outpoints (nodes with
no incoming edge); removing them leaves a smaller DAG whose own outpoints
must each receive at least one edge from the removed layer.  Counting DAGs
with exactly k outpoints,

    a(n,k) = C(n,k) sum_s (2^k-1)^s 2^(k(n-k-s)) a(n-k,s),   a(0,0) = 1,

turns that decomposition into an exact sampler: draw the outpoint count, the
outpoint labels, the sub-DAG, and the wiring, each with probability
proportional to its exact integer weight.  All weights are Python big
integers, so draws are exactly uniform with no floating-point bias.
"""

from __future__ import annotations

import itertools
import json
import math
import sys
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from random import Random

import numpy as np

from . import beliefs as bel
from .errors import (InsufficientNodes, PartTooLarge, SupportMismatch,
                     TooLarge)
from .graphs import Dag, _iter_bits

ENUMERATION_LIMIT = 6
PART_VARIABLE_CAP = 12
DEFAULT_SAMPLES = 10 ** 6
DEFAULT_LAPLACE = sys.float_info.min


class DagCounts:
    """Lazy tables of R(n), a(n,k), and cumulative sampling weights."""

    def __init__(self):
        self._r: list[int] = [1]
        self._a: dict[tuple[int, int], int] = {(0, 0): 1}
        self._outpoint_cum: dict[int, list[int]] = {}
        self._wiring_cum: dict[tuple[int, int], tuple[list[int], list[int]]] = {}

    def r(self, n: int) -> int:
        if n < 0:
            raise ValueError("n must be nonnegative")
        while len(self._r) <= n:
            m = len(self._r)
            total = 0
            for k in range(1, m + 1):
                term = math.comb(m, k) * (1 << (k * (m - k))) * self._r[m - k]
                total += term if k % 2 == 1 else -term
            self._r.append(total)
        return self._r[n]

    def a(self, n: int, k: int) -> int:
        if not 0 <= k <= n:
            raise ValueError(f"need 0 <= k <= n, got ({n},{k})")
        if k == 0:
            return 1 if n == 0 else 0
        key = (n, k)
        if key not in self._a:
            if k == n:
                self._a[key] = 1
            else:
                m = n - k
                acc = 0
                for s in range(1, m + 1):
                    acc += ((1 << k) - 1) ** s * (1 << (k * (m - s))) * self.a(m, s)
                self._a[key] = math.comb(n, k) * acc
        return self._a[key]

    def outpoint_cum(self, n: int) -> list[int]:
        """Cumulative a(n,k) for k = 1..n (used to draw the outpoint count)."""
        if n not in self._outpoint_cum:
            cum, acc = [], 0
            for k in range(1, n + 1):
                acc += self.a(n, k)
                cum.append(acc)
            self._outpoint_cum[n] = cum
        return self._outpoint_cum[n]

    def wiring_cum(self, m: int, k: int) -> tuple[list[int], list[int]]:
        """Cumulative weights over the sub-DAG outpoint count s for a layer
        of k outpoints above m remaining nodes (s = 1..m)."""
        key = (m, k)
        if key not in self._wiring_cum:
            svals, cum, acc = [], [], 0
            for s in range(1, m + 1):
                acc += ((1 << k) - 1) ** s * (1 << (k * (m - s))) * self.a(m, s)
                svals.append(s)
                cum.append(acc)
            self._wiring_cum[key] = (svals, cum)
        return self._wiring_cum[key]


_TABLES = DagCounts()


def count_dags(n: int) -> int:
    """Exact number of labeled DAGs on n nodes."""
    return _TABLES.r(n)


def count_dags_by_outpoints(n: int, k: int) -> int:
    """Exact number of labeled DAGs on n nodes with exactly k outpoints."""
    return _TABLES.a(n, k)


# ---------------------------------------------------------------------------
# Sampling and enumeration.  Both produce parent bitmasks plus a topological
# order (outpoint layers first), which is all the configuration machinery
# needs; `Dag` objects are only materialized at the public boundary.

def _sample_structure(n: int, rng: Random,
                      tables: DagCounts = _TABLES) -> tuple[list[int], list[int]]:
    parents = [0] * n
    if n == 0:
        return [], parents
    labels = list(range(n))
    getrandbits = rng.getrandbits
    randrange = rng.randrange

    # Layers are carved out of `labels` in place (partial Fisher-Yates), so
    # after the recursion `labels` lists the nodes in topological order and
    # a sub-DAG's outpoints sit at the front of its region.
    def rec(lo: int, k: int) -> None:
        m = n - lo
        for i in range(k):
            j = lo + i + randrange(m - i)
            labels[lo + i], labels[j] = labels[j], labels[lo + i]
        if k == m:
            return
        rest_lo = lo + k
        svals, cum = tables.wiring_cum(m - k, k)
        s = svals[bisect_right(cum, randrange(cum[-1]))]
        rec(rest_lo, s)
        forced_hi = rest_lo + s
        # wiring masks for the whole layer come from one bit blob; sub-DAG
        # outpoints reject all-zero masks so they get at least one new parent
        if k == 1:
            bit = 1 << labels[lo]
            blob = getrandbits(m - 1)
            pos = 0
            for idx in range(rest_lo, n):
                if idx < forced_hi or (blob >> pos) & 1:
                    parents[labels[idx]] |= bit
                pos += 1
        else:
            outs = labels[lo:rest_lo]
            top_mask = (1 << k) - 1
            blob = getrandbits(k * (m - k))
            pos = 0
            for idx in range(rest_lo, n):
                mask = (blob >> pos) & top_mask
                pos += k
                if idx < forced_hi:
                    while mask == 0:
                        mask = getrandbits(k)
                pm = 0
                while mask:
                    low = mask & -mask
                    pm |= 1 << outs[low.bit_length() - 1]
                    mask ^= low
                parents[labels[idx]] |= pm

    cum = tables.outpoint_cum(n)
    k0 = 1 + bisect_right(cum, randrange(cum[-1]))
    rec(0, k0)
    return labels, parents


def sample_uniform_dag(n: int, rng: Random,
                       node_names: tuple[str, ...] | None = None) -> Dag:
    """One exactly-uniform draw from all labeled DAGs on n nodes."""
    order, parents = _sample_structure(n, rng)
    del order
    edges = [(p, v) for v in range(n) for p in _iter_bits(parents[v])]
    return Dag(n, frozenset(edges), node_names)


def _enum_structures(labels: tuple[int, ...], parents: list[int]):
    """Yield (order,) for every DAG over ``labels``; ``parents`` is mutated
    in place and only valid until the next step of the iteration."""
    m = len(labels)
    if m == 0:
        yield ()
        return
    for k in range(1, m + 1):
        for outs in itertools.combinations(labels, k):
            out_set = set(outs)
            rest = tuple(v for v in labels if v not in out_set)
            if not rest:
                yield outs
                continue
            top = 1 << k
            expand = [0] * top
            for mask in range(1, top):
                low = mask & -mask
                expand[mask] = expand[mask ^ low] | (1 << outs[low.bit_length() - 1])
            clear = ~expand[top - 1]
            for sub_order in _enum_structures(rest, parents):
                # sub-DAG outpoints are exactly the rest nodes still without
                # parents; they must receive a nonempty subset of `outs`
                sub_set = {v for v in rest if parents[v] == 0}
                ranges = [range(1, top) if v in sub_set else range(top) for v in rest]
                for combo in itertools.product(*ranges):
                    for v, mask in zip(rest, combo):
                        parents[v] |= expand[mask]
                    yield outs + sub_order
                    for v in rest:
                        parents[v] &= clear


def enumerate_dags(n: int, node_names: tuple[str, ...] | None = None):
    """Iterate over every labeled DAG on n nodes (n <= 6: up to 3 781 503)."""
    if n > ENUMERATION_LIMIT:
        raise TooLarge(f"refusing to enumerate DAGs on {n} > {ENUMERATION_LIMIT} nodes")
    parents = [0] * n
    for _ in _enum_structures(tuple(range(n)), parents):
        edges = [(p, v) for v in range(n) for p in _iter_bits(parents[v])]
        yield Dag(n, frozenset(edges), node_names)


def _anc_masks(order, parents, anc: list[int]) -> None:
    for v in order:
        a = 0
        m = parents[v]
        while m:
            low = m & -m
            a |= low | anc[low.bit_length() - 1]
            m ^= low
        anc[v] = a


def _pair_code(anc: list[int], x: int, y: int) -> int:
    if (anc[y] >> x) & 1:
        return bel.FWD
    if (anc[x] >> y) & 1:
        return bel.BWD
    if anc[x] & anc[y]:
        return bel.COMMON
    return bel.NONE


# ---------------------------------------------------------------------------
# Uninformative configuration distribution U.

@dataclass(frozen=True)
class PriorTable:
    """Per-part tables of the uninformative configuration distribution.

    ``tables[i]`` holds U values for part i in part-local configuration
    order (the flat index is the 1-based configuration index minus one).
    Invalid configurations carry probability zero; Laplace mass is spread
    over valid configurations only.  ``exact_counts`` is present for the
    exact (enumeration) method and holds integer DAG counts per full
    configuration.
    """

    beliefs: bel.PathBeliefSet
    node_count: int
    parts: tuple[tuple[int, ...], ...]
    tables: tuple[np.ndarray, ...]
    valid: tuple[np.ndarray, ...]
    method: str
    samples: int
    laplace: float
    total_dags: int
    exact_counts: tuple[int, ...] | None = None

    def part_index(self, part: tuple[int, ...], config) -> int:
        idx = 0
        for i in part:
            idx = idx * 4 + config[i]
        return idx

    def u_c(self, config) -> float:
        """Product over parts of the part-local U value."""
        out = 1.0
        for part, table in zip(self.parts, self.tables):
            out *= float(table[self.part_index(part, config)])
        return out

    def n_c(self, config):
        """Estimated (or exact) number of DAGs realizing ``config``."""
        if self.exact_counts is not None:
            idx = 0
            for v in config:
                idx = idx * 4 + v
            return self.exact_counts[idx]
        u = self.u_c(config)
        if u == 0.0:
            return 0
        return Fraction(self.total_dags) * Fraction(u)

    def log_n_c(self, config) -> float:
        if self.exact_counts is not None:
            idx = 0
            for v in config:
                idx = idx * 4 + v
            cnt = self.exact_counts[idx]
            return math.log(cnt) if cnt else -math.inf
        u = self.u_c(config)
        if u == 0.0:
            return -math.inf
        return math.log(self.total_dags) + math.log(u)

    def product_table(self) -> np.ndarray:
        """U over the full configuration space (product of the parts).

        Parts are ascending index tuples, so placing each part's axes at its
        variables' positions is a plain reshape with broadcast 1-dims.
        """
        n = self.beliefs.n
        out = np.ones((4,) * n)
        for part, table in zip(self.parts, self.tables):
            members = set(part)
            dims = [4 if i in members else 1 for i in range(n)]
            out = out * table.reshape(dims)
        return out.reshape(-1)


def estimate_u(beliefs: bel.PathBeliefSet, node_count: int,
               samples: int = DEFAULT_SAMPLES, laplace: float = DEFAULT_LAPLACE,
               method: str = "fact", rng: Random | None = None) -> PriorTable:
    """Estimate (or exactly compute) the uninformative configuration
    distribution U over ``node_count``-node DAGs.

    * ``exact``: tally every DAG (node_count <= 6); one part.
    * ``full``: tally ``samples`` uniform DAGs over the joint configuration
      space; one part.
    * ``fact``: same sampled DAG set, tallied per independent-partition part;
      U factorizes as the product of the per-part tables.

    Laplace correction (parameter ``laplace``) spreads over valid
    configurations only, so impossible configurations keep probability zero.
    Validity matches realizability once node_count is at least the number of
    distinct belief nodes plus the number of variables; below that it is
    only an upper bound on the realizable set.
    """
    method = method.lower()
    if method not in ("exact", "full", "fact"):
        raise ValueError(f"unknown method {method!r}")
    if beliefs.max_node() >= node_count:
        raise InsufficientNodes(
            f"beliefs reference node {beliefs.max_node()} but only "
            f"{node_count} nodes are available")
    if method == "fact":
        parts = bel.independent_partition(beliefs)
    else:
        parts = (tuple(range(beliefs.n)),) if beliefs.n else ()
    for part in parts:
        if len(part) > PART_VARIABLE_CAP:
            raise PartTooLarge(
                f"part with {len(part)} path variables exceeds the cap of "
                f"{PART_VARIABLE_CAP}; split the belief set")
    valid = tuple(np.array(bel.valid_config_flags(beliefs, part), dtype=bool)
                  for part in parts)
    total_dags = count_dags(node_count)

    if method == "exact":
        if node_count > ENUMERATION_LIMIT:
            raise TooLarge(f"exact method needs node_count <= {ENUMERATION_LIMIT}")
        return _estimate_exact(beliefs, node_count, parts, valid, total_dags)

    if samples < 0:
        raise ValueError("samples must be nonnegative")
    if samples == 0 and laplace <= 0:
        raise ValueError("need samples > 0 or laplace > 0")
    if rng is None:
        rng = Random(0)
    if not parts:
        return PriorTable(beliefs, node_count, parts, (), (), method,
                          samples, laplace, total_dags)
    tallies = _tally_samples(beliefs, node_count, samples, rng, parts)
    tables = _laplace_tables(tallies, valid, samples, laplace)
    return PriorTable(beliefs, node_count, parts, tables, valid,
                      method, samples, laplace, total_dags)


def estimate_u_shared(beliefs: bel.PathBeliefSet, node_count: int,
                      samples: int = DEFAULT_SAMPLES,
                      laplace: float = DEFAULT_LAPLACE,
                      rng: Random | None = None) -> tuple[PriorTable, PriorTable]:
    """FULL and FACT estimates of U built from one shared DAG sample set."""
    if beliefs.max_node() >= node_count:
        raise InsufficientNodes(
            f"beliefs reference node {beliefs.max_node()} but only "
            f"{node_count} nodes are available")
    if rng is None:
        rng = Random(0)
    full_parts = (tuple(range(beliefs.n)),) if beliefs.n else ()
    fact_parts = bel.independent_partition(beliefs)
    for part in full_parts + fact_parts:
        if len(part) > PART_VARIABLE_CAP:
            raise PartTooLarge(f"part with {len(part)} variables exceeds "
                               f"{PART_VARIABLE_CAP}")
    all_parts = full_parts + fact_parts
    valid = tuple(np.array(bel.valid_config_flags(beliefs, part), dtype=bool)
                  for part in all_parts)
    tallies = _tally_samples(beliefs, node_count, samples, rng, all_parts)
    tables = _laplace_tables(tallies, valid, samples, laplace)
    total_dags = count_dags(node_count)
    nf = len(full_parts)
    full = PriorTable(beliefs, node_count, full_parts, tables[:nf], valid[:nf],
                      "full", samples, laplace, total_dags)
    fact = PriorTable(beliefs, node_count, fact_parts, tables[nf:], valid[nf:],
                      "fact", samples, laplace, total_dags)
    return full, fact


def _tally_samples(beliefs, node_count, samples, rng, parts):
    pair_lists = [[(beliefs.variables[i].x, beliefs.variables[i].y) for i in part]
                  for part in parts]
    tallies = [np.zeros(4 ** len(part), dtype=np.int64) for part in parts]
    anc = [0] * node_count
    for _ in range(samples):
        order, parents = _sample_structure(node_count, rng)
        _anc_masks(order, parents, anc)
        for pairs, tally in zip(pair_lists, tallies):
            idx = 0
            for x, y in pairs:
                idx = idx * 4 + _pair_code(anc, x, y)
            tally[idx] += 1
    return tallies


def _laplace_tables(tallies, valid, samples, laplace):
    tables = []
    for tally, vmask in zip(tallies, valid):
        c = int(vmask.sum())
        table = np.zeros(len(tally))
        table[vmask] = (tally[vmask] + laplace) / (samples + c * laplace)
        tables.append(table)
    return tuple(tables)


def _estimate_exact(beliefs, node_count, parts, valid, total_dags) -> PriorTable:
    n_vars = beliefs.n
    pairs = [(v.x, v.y) for v in beliefs.variables]
    counts = [0] * (4 ** n_vars)
    parents = [0] * node_count
    anc = [0] * node_count
    for order in _enum_structures(tuple(range(node_count)), parents):
        _anc_masks(order, parents, anc)
        idx = 0
        for x, y in pairs:
            idx = idx * 4 + _pair_code(anc, x, y)
        counts[idx] += 1
    table = np.array(counts, dtype=float) / total_dags
    tables = (table,) if parts else ()
    return PriorTable(beliefs, node_count, parts, tables, valid,
                      "exact", 0, 0.0, total_dags, tuple(counts))


def uninformative_pair_marginal(node_count: int, rng: Random | None = None,
                                samples: int = 20_000) -> bel.BeliefDistribution:
    """Marginal distribution of a single path variable under uniform DAGs.

    Exact by enumeration for node_count <= 5, sampled otherwise.  By label
    exchangeability the result applies to every node pair.
    """
    if node_count < 2:
        raise InsufficientNodes("need at least two nodes for a path variable")
    if node_count <= 5:
        return _exact_pair_marginal(node_count)
    if rng is None:
        rng = Random(0)
    tally = [0, 0, 0, 0]
    anc = [0] * node_count
    for _ in range(samples):
        order, parents = _sample_structure(node_count, rng)
        _anc_masks(order, parents, anc)
        tally[_pair_code(anc, 0, 1)] += 1
    return bel.BeliefDistribution.from_tuple([t / samples for t in tally])


_EXACT_PAIR_CACHE: dict[int, bel.BeliefDistribution] = {}


def _exact_pair_marginal(node_count: int) -> bel.BeliefDistribution:
    if node_count not in _EXACT_PAIR_CACHE:
        tally = [0, 0, 0, 0]
        parents = [0] * node_count
        anc = [0] * node_count
        for order in _enum_structures(tuple(range(node_count)), parents):
            _anc_masks(order, parents, anc)
            tally[_pair_code(anc, 0, 1)] += 1
        total = count_dags(node_count)
        _EXACT_PAIR_CACHE[node_count] = bel.BeliefDistribution.from_tuple(
            [Fraction(t, total) for t in tally])
    return _EXACT_PAIR_CACHE[node_count]


def kl_divergence(p, q) -> float:
    """sum p_k ln(p_k / q_k) with 0 ln 0 = 0; requires support(p) inside
    support(q)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise SupportMismatch("distributions differ in length")
    if np.any((q == 0) & (p > 0)):
        raise SupportMismatch("p places mass where q is zero")
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


# ---------------------------------------------------------------------------
# Serialization.

def dump_prior_table(pt: PriorTable) -> str:
    doc = {
        "method": pt.method,
        "samples": pt.samples,
        "laplace": pt.laplace,
        "node_count": pt.node_count,
        "parts": [list(p) for p in pt.parts],
        "tables": [[float(v) for v in t] for t in pt.tables],
    }
    return json.dumps(doc, indent=2) + "\n"


def load_prior_table(text: str, beliefs: bel.PathBeliefSet) -> PriorTable:
    doc = json.loads(text)
    parts = tuple(tuple(int(i) for i in p) for p in doc["parts"])
    covered = sorted(i for p in parts for i in p)
    if covered != list(range(beliefs.n)):
        raise ValueError("prior-table parts do not cover the belief variables")
    tables = tuple(np.array(t, dtype=float) for t in doc["tables"])
    for part, table in zip(parts, tables):
        if table.shape != (4 ** len(part),):
            raise ValueError("prior-table entry count does not match its part")
    valid = tuple(np.array(bel.valid_config_flags(beliefs, part), dtype=bool)
                  for part in parts)
    node_count = int(doc["node_count"])
    return PriorTable(beliefs, node_count, parts, tables, valid,
                      str(doc["method"]), int(doc["samples"]),
                      float(doc["laplace"]), count_dags(node_count))
