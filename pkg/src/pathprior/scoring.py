"""Network scores: BDeu data score, path-belief prior score, local deltas.

The total score of a graph decomposes as data score plus prior score.  The
data part is the BDeu marginal likelihood (score-equivalent across a Markov
class); the prior part depends on the graph only through its path-variable
configuration: counted style scores ln J(C) - ln N_C, so with uninformative
beliefs every graph gets the same prior, while raw style drops the 1/N_C
factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.special import gammaln

from . import beliefs as bel
from .bn import Dataset, FamilyCounts, family_counts
from .counts import PriorTable
from .errors import ArityMismatch
from .graphs import (DELETE, INSERT, REVERSE, Dag, Move, ReachMatrix,
                     closure_after_edit)
from .joint import FactoredJoint


def bdeu_family(counts: FamilyCounts, ess: float = 1.0) -> float:
    """BDeu log marginal likelihood of one family.

    With q parent configurations and child arity r, the Dirichlet weights
    are ess/q per row and ess/(q r) per cell.
    """
    if ess <= 0:
        raise ValueError("ess must be positive")
    njk = counts.njk
    q, r = njk.shape
    a_row = ess / q
    a_cell = ess / (q * r)
    nij = counts.nij()
    row_terms = gammaln(a_row) - gammaln(a_row + nij)
    cell_terms = gammaln(a_cell + njk) - gammaln(a_cell)
    return float(row_terms.sum() + cell_terms.sum())


@dataclass
class ScoreContext:
    """Dataset, hyperparameters, optional path-belief prior, and the family
    score cache (pure function of the dataset, so safe to share)."""

    dataset: Dataset
    ess: float = 1.0
    joint: FactoredJoint | None = None
    prior_table: PriorTable | None = None
    prior_style: str = "counted"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.prior_style not in ("counted", "raw"):
            raise ValueError(f"unknown prior style {self.prior_style!r}")
        if (self.joint is None) != (self.prior_table is None):
            raise ValueError("joint and prior_table must be given together")

    @property
    def has_prior(self) -> bool:
        return self.joint is not None

    def family_score(self, child: int, parents) -> float:
        key = (child, tuple(sorted(parents)))
        hit = self._cache.get(key)
        if hit is None:
            hit = bdeu_family(family_counts(self.dataset, child, key[1]), self.ess)
            self._cache[key] = hit
        return hit


def data_score(dag: Dag, ctx: ScoreContext) -> float:
    if dag.node_count != len(ctx.dataset.names):
        raise ArityMismatch("graph and dataset disagree on variable count")
    return sum(ctx.family_score(v, dag.parents(v)) for v in range(dag.node_count))


def prior_score(dag: Dag, closure: ReachMatrix, ctx: ScoreContext) -> float:
    """ln J(C_G) - ln N_{C_G} (counted style) or ln J(C_G) (raw style);
    -inf marks zero-probability configurations."""
    if not ctx.has_prior:
        raise ValueError("score context has no prior configured")
    config = bel.configuration_of(dag, closure, ctx.joint.beliefs)
    return prior_score_of_config(config, ctx)


def prior_score_of_config(config, ctx: ScoreContext) -> float:
    jp = ctx.joint.joint_prob(config)
    if jp <= 0.0:
        return -math.inf
    if ctx.prior_style == "raw":
        return math.log(jp)
    log_nc = ctx.prior_table.log_n_c(config)
    if log_nc == -math.inf:
        return -math.inf
    return math.log(jp) - log_nc


def total_score(dag: Dag, closure: ReachMatrix | None, ctx: ScoreContext) -> float:
    """Data score plus prior score (prior term zero when none configured)."""
    score = data_score(dag, ctx)
    if ctx.has_prior:
        if closure is None:
            raise ValueError("closure required when a prior is configured")
        score += prior_score(dag, closure, ctx)
    return score


def move_deltas(dag: Dag, closure: ReachMatrix, ctx: ScoreContext,
                move: Move, old_config=None,
                old_prior: float | None = None) -> tuple[float, float]:
    """(data delta, prior delta) of one edit; exploits decomposability, so
    only the touched families are rescored.  Raises CycleWouldForm for
    edits that would not leave a DAG.  ``old_config``/``old_prior`` may be
    passed to avoid recomputing the pre-move state per candidate.
    """
    kind, x, y = move
    if kind == INSERT:
        pa = dag.parents(y)
        d_data = ctx.family_score(y, pa | {x}) - ctx.family_score(y, pa)
    elif kind == DELETE:
        pa = dag.parents(y)
        d_data = ctx.family_score(y, pa - {x}) - ctx.family_score(y, pa)
    elif kind == REVERSE:
        pa_y = dag.parents(y)
        pa_x = dag.parents(x)
        d_data = (ctx.family_score(y, pa_y - {x}) - ctx.family_score(y, pa_y)
                  + ctx.family_score(x, pa_x | {y}) - ctx.family_score(x, pa_x))
    else:
        raise ValueError(f"unknown move kind {kind!r}")
    if not ctx.has_prior:
        # still validate acyclicity for inserts/reversals
        closure_after_edit(dag, closure, move)
        return d_data, 0.0
    new_closure = closure_after_edit(dag, closure, move)
    new_config = bel.configuration_from_closure(new_closure, ctx.joint.beliefs)
    if old_config is None:
        old_config = bel.configuration_from_closure(closure, ctx.joint.beliefs)
    if new_config == old_config:
        return d_data, 0.0
    if old_prior is None:
        old_prior = prior_score_of_config(old_config, ctx)
    d_prior = prior_score_of_config(new_config, ctx) - old_prior
    return d_data, d_prior


def delta_score(dag: Dag, closure: ReachMatrix, ctx: ScoreContext,
                move: Move) -> float:
    """total_score(after) - total_score(before) without a full rescore."""
    d_data, d_prior = move_deltas(dag, closure, ctx, move)
    return d_data + d_prior
