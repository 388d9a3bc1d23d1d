"""Greedy hill-climbing over DAGs with prior-aware moves.

The search repeatedly applies the best strictly-improving edge insertion,
deletion, or reversal, maintaining the reachability closure incrementally.
With a path-belief prior configured, the swap-equivalent operator can run
after every applied move: it walks the current Markov-equivalence class via
covered-edge reversals (breadth-first, bounded by a reversal budget) and
jumps to the class member with the highest prior score.  Score-equivalent
data scores make that jump free on the data side, so it never trades data
fit for prior fit.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from . import beliefs as bel
from .graphs import (DELETE, INSERT, REVERSE, Dag, Move, ReachMatrix,
                     closure_after_edit, covered_edge_moves, move_sort_key,
                     transitive_closure)
from .scoring import ScoreContext, data_score, move_deltas, prior_score_of_config


@dataclass(frozen=True)
class SearchOptions:
    use_swap: bool = False
    swap_budget: int = 1000
    improvement_threshold: float = 1e-9
    max_iterations: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.improvement_threshold < 0:
            raise ValueError("improvement threshold must be nonnegative")


@dataclass(frozen=True)
class MoveRecord:
    kind: str
    x: int
    y: int
    delta_data: float
    delta_prior: float
    config_index: int
    total_score: float


@dataclass
class SearchState:
    dag: Dag
    closure: ReachMatrix
    config: bel.Configuration | None
    data_score: float
    prior_score: float
    trace: list[MoveRecord] = field(default_factory=list)

    @property
    def total_score(self) -> float:
        return self.data_score + self.prior_score


def initial_state(ctx: ScoreContext, start: Dag) -> SearchState:
    closure = transitive_closure(start)
    if ctx.has_prior:
        config = bel.configuration_from_closure(closure, ctx.joint.beliefs)
        prior = prior_score_of_config(config, ctx)
    else:
        config, prior = None, 0.0
    return SearchState(start, closure, config, data_score(start, ctx), prior)


def candidate_moves(state: SearchState) -> list[Move]:
    """All acyclicity-preserving insertions, deletions, and reversals, in
    canonical order (insert < delete < reverse, then source, then target)."""
    dag, closure = state.dag, state.closure
    n = dag.node_count
    moves: list[Move] = []
    for x in range(n):
        for y in range(n):
            if x == y or dag.has_edge(x, y) or dag.has_edge(y, x):
                continue
            if not closure.reaches(y, x):
                moves.append((INSERT, x, y))
    for x, y in sorted(dag.edges):
        moves.append((DELETE, x, y))
    for x, y in sorted(dag.edges):
        # reversing is safe iff the edge is the only x=>y path
        if not any(closure.reaches(c, y) for c in dag.children(x) if c != y):
            moves.append((REVERSE, x, y))
    moves.sort(key=move_sort_key)
    return moves


def _apply(state: SearchState, ctx: ScoreContext, move: Move,
           d_data: float, d_prior: float) -> None:
    new_closure = closure_after_edit(state.dag, state.closure, move)
    state.dag = state.dag.apply(move)
    state.closure = new_closure
    state.data_score += d_data
    if ctx.has_prior:
        state.config = bel.configuration_from_closure(new_closure,
                                                      ctx.joint.beliefs)
        state.prior_score = prior_score_of_config(state.config, ctx)
    kind, x, y = move
    cfg_idx = bel.config_index(state.config) if state.config is not None else 0
    state.trace.append(MoveRecord(kind, x, y, d_data, d_prior, cfg_idx,
                                  state.total_score))


def greedy_search(ctx: ScoreContext, start: Dag,
                  opts: SearchOptions = SearchOptions()) -> SearchState:
    """Hill-climb from ``start``; deterministic given the tie-break order."""
    state = initial_state(ctx, start)
    if ctx.has_prior and opts.use_swap:
        swap_equivalent(state, ctx, opts.swap_budget)
    for _ in range(opts.max_iterations):
        best: tuple[float, Move, float, float] | None = None
        old_config = state.config
        old_prior = state.prior_score
        for move in candidate_moves(state):
            d_data, d_prior = move_deltas(state.dag, state.closure, ctx, move,
                                          old_config, old_prior)
            delta = d_data + d_prior
            if delta <= opts.improvement_threshold:
                continue
            if best is None or delta > best[0]:
                best = (delta, move, d_data, d_prior)
        if best is None:
            break
        _, move, d_data, d_prior = best
        _apply(state, ctx, move, d_data, d_prior)
        if ctx.has_prior and opts.use_swap:
            swap_equivalent(state, ctx, opts.swap_budget)
    return state


def swap_equivalent(state: SearchState, ctx: ScoreContext,
                    budget: int = 1000) -> SearchState:
    """Jump to the Markov-equivalent DAG with the highest prior score.

    Explores the equivalence class breadth-first through covered-edge
    reversals, spending at most ``budget`` reversals; classes small enough
    to enumerate within the budget are searched exactly.  Ties keep the
    incumbent, so an uninformative prior leaves the state untouched.
    No-op when no prior is configured.
    """
    if not ctx.has_prior:
        return state
    start_edges = state.dag.edges
    best_dag = state.dag
    best_prior = state.prior_score
    seen = {start_edges}
    queue = deque([state.dag])
    spent = 0
    while queue and spent < budget:
        dag = queue.popleft()
        for edge in covered_edge_moves(dag):
            if spent >= budget:
                break
            spent += 1
            neighbor = dag.apply((REVERSE,) + edge)
            if neighbor.edges in seen:
                continue
            seen.add(neighbor.edges)
            closure = transitive_closure(neighbor)
            config = bel.configuration_from_closure(closure, ctx.joint.beliefs)
            prior = prior_score_of_config(config, ctx)
            if prior > best_prior:
                best_prior = prior
                best_dag = neighbor
            queue.append(neighbor)
    if best_dag.edges != start_edges:
        closure = transitive_closure(best_dag)
        d_prior = best_prior - state.prior_score
        state.dag = best_dag
        state.closure = closure
        state.config = bel.configuration_from_closure(closure, ctx.joint.beliefs)
        # score equivalence makes the data score a no-op; recompute through
        # the cache to keep the recorded score honest to float precision
        new_data = data_score(best_dag, ctx)
        d_data = new_data - state.data_score
        state.data_score = new_data
        state.prior_score = best_prior
        state.trace.append(MoveRecord("swap", -1, -1, d_data, d_prior,
                                      bel.config_index(state.config),
                                      state.total_score))
    return state
