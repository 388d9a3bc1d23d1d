"""Joint distributions over path-variable configurations.

Marginal path beliefs rarely pin down a joint distribution; this module
computes one.  For coherent beliefs, iterative proportional fitting (IPFP)
finds the KL-projection of the uninformative configuration distribution U
onto the marginal constraints.  For incoherent beliefs (no joint satisfies
the marginals and still puts zero mass on impossible configurations), a
repair loop alternates IPFP sweeps with a pull of the target marginals
toward what the current joint actually realizes, yielding a proper joint
whose implied marginals are a coherent belief set close to the input.

When U factorizes over an independent partition the fit runs per part and
the result factorizes the same way.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import beliefs as bel
from .counts import PriorTable
from .errors import NotConverged, PartTooLarge

DEFAULT_EPS = 1e-9
DEFAULT_IPFP_CYCLES = 10_000
DEFAULT_GEMA_OUTER = 1_000

# Non-convergence is declared early when the deviation improves by less than
# 0.1% over this many cycles while still far from tolerance; incoherent
# targets make IPFP circle at a positive deviation, and waiting out the full
# cycle budget on every such part would dominate the runtime.
_STALL_WINDOW = 100
_STALL_FACTOR = 0.999


def _axis_marginal(J: np.ndarray, axis: int) -> np.ndarray:
    axes = tuple(i for i in range(J.ndim) if i != axis)
    return J.sum(axis=axes) if axes else J.copy()


def _sweep(J: np.ndarray, targets: list[np.ndarray]) -> bool:
    """One full IPFP cycle in place; returns True if some target mass sits
    on a value whose configurations currently carry no probability."""
    unreachable = False
    k = J.ndim
    for axis in range(k):
        m = _axis_marginal(J, axis)
        t = targets[axis]
        if np.any((m <= 0.0) & (t > 0.0)):
            unreachable = True
        factor = np.divide(t, m, out=np.zeros(4), where=m > 0.0)
        shape = [1] * k
        shape[axis] = 4
        J *= factor.reshape(shape)
    return unreachable


def _max_deviation(J: np.ndarray, targets: list[np.ndarray]) -> float:
    dev = 0.0
    for axis in range(J.ndim):
        d = float(np.max(np.abs(_axis_marginal(J, axis) - targets[axis])))
        dev = max(dev, d)
    return dev


def ipfp(u, targets, eps: float = DEFAULT_EPS,
         max_cycles: int = DEFAULT_IPFP_CYCLES) -> tuple[np.ndarray, int]:
    """KL-project ``u`` onto the marginal constraints ``targets``.

    ``u`` is a flat table over 4**k configurations (zero on invalid ones),
    ``targets`` one length-4 distribution per variable.  Returns the fitted
    flat table and the number of cycles used; raises NotConverged when the
    constraints cannot be met (incoherent targets), which callers treat as
    the signal to fall back to the repair loop.
    """
    k = len(targets)
    J = np.asarray(u, dtype=float).reshape((4,) * k).copy()
    total = J.sum()
    if not total > 0:
        raise ValueError("base table has no probability mass")
    J /= total
    targets = [np.asarray(t, dtype=float) for t in targets]
    history: list[float] = []
    for cycle in range(max_cycles + 1):
        dev = _max_deviation(J, targets)
        if dev < eps:
            return J.reshape(-1), cycle
        history.append(dev)
        if (len(history) > _STALL_WINDOW
                and dev > history[-1 - _STALL_WINDOW] * _STALL_FACTOR
                and dev > 100.0 * eps):
            raise NotConverged("marginal deviation stalled",
                               deviation=dev, iterations=cycle)
        if cycle == max_cycles:
            break
        if _sweep(J, targets):
            raise NotConverged("target mass on unreachable values",
                               deviation=dev, iterations=cycle)
        s = J.sum()
        if s > 0:
            J /= s
    raise NotConverged("cycle budget exhausted",
                       deviation=_max_deviation(J, targets),
                       iterations=max_cycles)


# Granularity at which the repair loop declares the implied marginals
# settled: summed total-variation movement per iteration.  The headline
# repaired marginals are insensitive to this constant over two orders of
# magnitude; it is pinned so the follow-up projection reproduces published
# joint tables, whose faint configurations feel the remaining slack.
REPAIR_GRANULARITY = 2e-4


@dataclass(frozen=True)
class RepairResult:
    joint: np.ndarray
    marginals: tuple[np.ndarray, ...]
    iterations: int
    converged: bool

    def max_shift(self, targets) -> float:
        return max(float(np.max(np.abs(m - np.asarray(t, dtype=float))))
                   for m, t in zip(self.marginals, targets))


def _project(u: np.ndarray, targets: list[np.ndarray], eps: float,
             max_cycles: int) -> tuple[np.ndarray, int]:
    """IPFP that never raises: runs to tolerance, stall, or budget and
    returns its last iterate (marginal targets may be borderline feasible)."""
    J = u.copy()
    history: list[float] = []
    for cycle in range(max_cycles):
        dev = _max_deviation(J, targets)
        if dev < eps:
            return J, cycle
        history.append(dev)
        if (len(history) > _STALL_WINDOW
                and dev > history[-1 - _STALL_WINDOW] * _STALL_FACTOR):
            return J, cycle
        _sweep(J, targets)
        s = J.sum()
        if s > 0:
            J /= s
    return J, max_cycles


def gema(u, targets, eps: float = DEFAULT_EPS,
         max_outer: int = DEFAULT_GEMA_OUTER) -> RepairResult:
    """Fit a proper joint even when the target marginals are incoherent.

    Coherent targets are detected by running plain IPFP first, so the
    output then equals the IPFP solution.  Otherwise the marginals are
    repaired by averaged multiplicative updates: each iteration mixes the
    per-constraint IPFP factors arithmetically, which drives the joint's
    implied marginals toward a coherent belief set that stays close to the
    inputs (it descends an aggregate of per-variable KL divergences).  Once
    the implied marginals settle, the uninformative table is projected onto
    them so the final joint is, up to the repair granularity, the
    KL-closest joint to ``u`` among those with the repaired marginals.
    """
    k = len(targets)
    try:
        fitted, cycles = ipfp(u, targets, eps)
        shaped = fitted.reshape((4,) * k)
        implied = tuple(_axis_marginal(shaped, a) for a in range(k))
        return RepairResult(fitted, implied, cycles, True)
    except NotConverged:
        return _repair(u, targets, eps, max_outer)


def _repair(u, targets, eps: float, max_outer: int) -> RepairResult:
    k = len(targets)
    base = np.asarray(u, dtype=float).reshape((4,) * k).copy()
    total = base.sum()
    if not total > 0:
        raise ValueError("base table has no probability mass")
    base /= total
    orig = [np.asarray(t, dtype=float) for t in targets]
    J = base.copy()
    prev: list[np.ndarray] | None = None
    implied = [_axis_marginal(J, a) for a in range(k)]
    settled = False
    outer = max_outer
    for outer in range(1, max_outer + 1):
        factor = np.zeros_like(J)
        for axis in range(k):
            m = _axis_marginal(J, axis)
            f = np.divide(orig[axis], m, out=np.zeros(4), where=m > 0.0)
            shape = [1] * k
            shape[axis] = 4
            factor = factor + f.reshape(shape)
        J *= factor / k
        s = J.sum()
        if s > 0:
            J /= s
        implied = [_axis_marginal(J, a) for a in range(k)]
        if prev is not None:
            move = sum(0.5 * float(np.sum(np.abs(a - b)))
                       for a, b in zip(implied, prev))
            if move < REPAIR_GRANULARITY:
                settled = True
                break
        prev = implied
    projected, _ = _project(base, implied, eps, DEFAULT_IPFP_CYCLES)
    final = tuple(_axis_marginal(projected, a) for a in range(k))
    return RepairResult(projected.reshape(-1), final, outer, settled)


@dataclass(frozen=True)
class FactoredJoint:
    """Per-part joint tables over valid configurations.

    ``tables[i]`` is a flat probability table for part i (configuration
    index order); the joint probability of a full configuration is the
    product of its part-local entries.
    """

    beliefs: bel.PathBeliefSet
    parts: tuple[tuple[int, ...], ...]
    tables: tuple[np.ndarray, ...]
    coherent: tuple[bool, ...]
    iterations: tuple[int, ...]
    max_deviation: tuple[float, ...]

    def part_index(self, part: tuple[int, ...], config) -> int:
        idx = 0
        for i in part:
            idx = idx * 4 + config[i]
        return idx

    def joint_prob(self, config) -> float:
        out = 1.0
        for part, table in zip(self.parts, self.tables):
            out *= float(table[self.part_index(part, config)])
        return out

    def implied_marginals(self) -> list[bel.BeliefDistribution]:
        """Marginal distribution of every path variable under this joint."""
        out: list[bel.BeliefDistribution | None] = [None] * self.beliefs.n
        for part, table in zip(self.parts, self.tables):
            shaped = table.reshape((4,) * len(part))
            for pos, var_idx in enumerate(part):
                m = _axis_marginal(shaped, pos)
                out[var_idx] = bel.BeliefDistribution.from_tuple(m / m.sum())
        return out  # type: ignore[return-value]

    def all_coherent(self) -> bool:
        return all(self.coherent)

    def product_table(self) -> np.ndarray:
        n = self.beliefs.n
        out = np.ones((4,) * n)
        for part, table in zip(self.parts, self.tables):
            members = set(part)
            dims = [4 if i in members else 1 for i in range(n)]
            out = out * table.reshape(dims)
        return out.reshape(-1)


def compute_joint(beliefs: bel.PathBeliefSet, prior_table: PriorTable,
                  eps: float = DEFAULT_EPS,
                  ipfp_cycles: int = DEFAULT_IPFP_CYCLES,
                  gema_outer: int = DEFAULT_GEMA_OUTER) -> FactoredJoint:
    """Joint over configurations: IPFP per part, repair on incoherence."""
    if prior_table.beliefs is not beliefs and \
            prior_table.beliefs.variables != beliefs.variables:
        raise ValueError("prior table was built for a different belief set")
    tables = []
    coherent = []
    iterations = []
    deviations = []
    for part, u in zip(prior_table.parts, prior_table.tables):
        if len(part) > 12:
            raise PartTooLarge(f"part with {len(part)} variables")
        targets = [beliefs.distributions[i].as_tuple() for i in part]
        try:
            fitted, cycles = ipfp(u, targets, eps, ipfp_cycles)
            tables.append(fitted)
            coherent.append(True)
            iterations.append(cycles)
            deviations.append(_max_deviation(
                fitted.reshape((4,) * len(part)),
                [np.asarray(t) for t in targets]))
        except NotConverged:
            res = _repair(u, targets, eps, gema_outer)
            tables.append(res.joint)
            coherent.append(False)
            iterations.append(res.iterations)
            deviations.append(res.max_shift(targets))
    return FactoredJoint(beliefs, prior_table.parts, tuple(tables),
                         tuple(coherent), tuple(iterations), tuple(deviations))


def is_coherent(beliefs: bel.PathBeliefSet, prior_table: PriorTable,
                eps: float = DEFAULT_EPS,
                max_cycles: int = DEFAULT_IPFP_CYCLES) -> bool:
    """True iff IPFP meets the marginal constraints on every part."""
    for part, u in zip(prior_table.parts, prior_table.tables):
        targets = [beliefs.distributions[i].as_tuple() for i in part]
        try:
            ipfp(u, targets, eps, max_cycles)
        except NotConverged:
            return False
    return True


def dump_joint(fj: FactoredJoint, prior_table: PriorTable | None = None) -> str:
    doc = {
        "parts": [list(p) for p in fj.parts],
        "joints": [[float(v) for v in t] for t in fj.tables],
        "coherent": list(fj.coherent),
        "iterations": list(fj.iterations),
        "max_deviation": [float(d) for d in fj.max_deviation],
        "implied_marginals": [
            dict(zip(bel.VALUE_KEYS, d.as_tuple()))
            for d in fj.implied_marginals()
        ],
    }
    if prior_table is not None:
        doc["prior"] = {
            "method": prior_table.method,
            "samples": prior_table.samples,
            "laplace": prior_table.laplace,
            "node_count": prior_table.node_count,
            "tables": [[float(v) for v in t] for t in prior_table.tables],
        }
    return json.dumps(doc, indent=2) + "\n"


def load_joint(text: str, beliefs: bel.PathBeliefSet) -> FactoredJoint:
    doc = json.loads(text)
    parts = tuple(tuple(int(i) for i in p) for p in doc["parts"])
    covered = sorted(i for p in parts for i in p)
    if covered != list(range(beliefs.n)):
        raise ValueError("joint parts do not cover the belief variables")
    tables = tuple(np.array(t, dtype=float) for t in doc["joints"])
    return FactoredJoint(beliefs, parts, tables,
                         tuple(bool(c) for c in doc["coherent"]),
                         tuple(int(i) for i in doc["iterations"]),
                         tuple(float(d) for d in doc["max_deviation"]))
