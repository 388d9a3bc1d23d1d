"""Labeled DAGs and PDAGs: reachability, Markov equivalence, edits, text I/O.

Nodes are identified positionally (0..n-1); names are metadata resolved at
I/O boundaries.  Reachability tables are kept as per-node integer bitmasks,
which makes closure maintenance and ancestor queries cheap for the graph
sizes this package targets (tens of nodes).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CycleWouldForm, NodeSetMismatch, ParseError

INSERT = "insert"
DELETE = "delete"
REVERSE = "reverse"

#: A structural edit: (kind, x, y) acts on the edge x->y.
Move = tuple[str, int, int]

_MOVE_RANK = {INSERT: 0, DELETE: 1, REVERSE: 2}


def move_sort_key(move: Move) -> tuple[int, int, int]:
    """Canonical move order: insert < delete < reverse, then source, target."""
    kind, x, y = move
    return (_MOVE_RANK[kind], x, y)


def default_names(n: int) -> tuple[str, ...]:
    return tuple(f"V{i}" for i in range(n))


def _iter_bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph over nodes 0..node_count-1."""

    node_count: int
    edges: frozenset[tuple[int, int]]
    node_names: tuple[str, ...] | None = None
    _parents: tuple[frozenset[int], ...] = field(init=False, repr=False, compare=False)
    _children: tuple[frozenset[int], ...] = field(init=False, repr=False, compare=False)
    _topo: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.node_count
        if n < 0:
            raise ValueError("node_count must be nonnegative")
        edges = frozenset((int(x), int(y)) for x, y in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.node_names is not None:
            names = tuple(self.node_names)
            if len(names) != n or len(set(names)) != n:
                raise ValueError("node_names must be distinct and match node_count")
            object.__setattr__(self, "node_names", names)
        parents = [set() for _ in range(n)]
        children = [set() for _ in range(n)]
        for x, y in edges:
            if not (0 <= x < n and 0 <= y < n):
                raise ValueError(f"edge ({x},{y}) out of range for {n} nodes")
            if x == y:
                raise ValueError(f"self-loop on node {x}")
            parents[y].add(x)
            children[x].add(y)
        # Kahn's algorithm; doubles as the acyclicity check.
        indeg = [len(p) for p in parents]
        ready = [v for v in range(n) if indeg[v] == 0]
        topo = []
        while ready:
            v = ready.pop()
            topo.append(v)
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(topo) != n:
            raise CycleWouldForm("edge set contains a directed cycle")
        object.__setattr__(self, "_parents", tuple(frozenset(p) for p in parents))
        object.__setattr__(self, "_children", tuple(frozenset(c) for c in children))
        object.__setattr__(self, "_topo", tuple(topo))

    def parents(self, v: int) -> frozenset[int]:
        return self._parents[v]

    def children(self, v: int) -> frozenset[int]:
        return self._children[v]

    def topological_order(self) -> tuple[int, ...]:
        return self._topo

    def has_edge(self, x: int, y: int) -> bool:
        return (x, y) in self.edges

    def names(self) -> tuple[str, ...]:
        return self.node_names if self.node_names is not None else default_names(self.node_count)

    def apply(self, move: Move) -> "Dag":
        """Return the DAG after one edge edit (validity re-checked)."""
        kind, x, y = move
        if kind == INSERT:
            if (x, y) in self.edges:
                raise ValueError(f"edge ({x},{y}) already present")
            new_edges = self.edges | {(x, y)}
        elif kind == DELETE:
            if (x, y) not in self.edges:
                raise ValueError(f"edge ({x},{y}) not present")
            new_edges = self.edges - {(x, y)}
        elif kind == REVERSE:
            if (x, y) not in self.edges:
                raise ValueError(f"edge ({x},{y}) not present")
            new_edges = (self.edges - {(x, y)}) | {(y, x)}
        else:
            raise ValueError(f"unknown move kind {kind!r}")
        return Dag(self.node_count, new_edges, self.node_names)


@dataclass(frozen=True)
class Pdag:
    """Partially directed graph; each adjacency is directed or undirected."""

    node_count: int
    directed: frozenset[tuple[int, int]]
    undirected: frozenset[tuple[int, int]]
    node_names: tuple[str, ...] | None = None

    def __post_init__(self):
        n = self.node_count
        directed = frozenset((int(x), int(y)) for x, y in self.directed)
        undirected = frozenset((min(int(a), int(b)), max(int(a), int(b)))
                               for a, b in self.undirected)
        for x, y in directed | undirected:
            if not (0 <= x < n and 0 <= y < n) or x == y:
                raise ValueError(f"bad edge ({x},{y})")
        for x, y in directed:
            key = (min(x, y), max(x, y))
            if key in undirected or (y, x) in directed:
                raise ValueError(f"pair ({x},{y}) appears with conflicting orientations")
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)
        if self.node_names is not None:
            names = tuple(self.node_names)
            if len(names) != n or len(set(names)) != n:
                raise ValueError("node_names must be distinct and match node_count")
            object.__setattr__(self, "node_names", names)

    def names(self) -> tuple[str, ...]:
        return self.node_names if self.node_names is not None else default_names(self.node_count)

    def pair_status(self, a: int, b: int) -> str:
        """One of 'none', 'undirected', 'forward' (a->b), 'backward' (b->a)."""
        if (a, b) in self.directed:
            return "forward"
        if (b, a) in self.directed:
            return "backward"
        if (min(a, b), max(a, b)) in self.undirected:
            return "undirected"
        return "none"


def dag_as_pdag(dag: Dag) -> Pdag:
    return Pdag(dag.node_count, dag.edges, frozenset(), dag.node_names)


@dataclass(frozen=True)
class ReachMatrix:
    """Strict reachability table of a DAG, as ancestor/descendant bitmasks.

    Bit y of ``desc[x]`` is set iff a nonempty directed path x => y exists;
    ``anc`` is the transpose.  ``reach[x][x]`` is always false.
    """

    node_count: int
    desc: tuple[int, ...]
    anc: tuple[int, ...]

    def reaches(self, x: int, y: int) -> bool:
        return (self.desc[x] >> y) & 1 == 1

    def have_common_ancestor(self, x: int, y: int) -> bool:
        return (self.anc[x] & self.anc[y]) != 0

    def matrix(self) -> list[list[bool]]:
        n = self.node_count
        return [[(self.desc[x] >> y) & 1 == 1 for y in range(n)] for x in range(n)]


def transitive_closure(dag: Dag) -> ReachMatrix:
    """Full reachability of ``dag``; O(|V|^2 + |V|*|E|) with bitset rows."""
    n = dag.node_count
    desc = [0] * n
    for v in reversed(dag.topological_order()):
        m = 0
        for c in dag.children(v):
            m |= (1 << c) | desc[c]
        desc[v] = m
    anc = [0] * n
    for v in dag.topological_order():
        m = 0
        for p in dag.parents(v):
            m |= (1 << p) | anc[p]
        anc[v] = m
    return ReachMatrix(n, tuple(desc), tuple(anc))


def closure_after_edit(dag: Dag, closure: ReachMatrix, move: Move) -> ReachMatrix:
    """Reachability of ``dag.apply(move)`` without rebuilding it from scratch.

    Insertion merges the head's reach row into every ancestor of the tail in
    O(|V|) word operations.  Deletion re-derives the rows of the tail's
    ancestors (the only rows that can shrink) from the edited adjacency;
    reversal is a deletion followed by an insertion.

    Raises CycleWouldForm when the edit would not leave a DAG.
    """
    kind, x, y = move
    if kind == INSERT:
        if x == y or closure.reaches(y, x):
            raise CycleWouldForm(f"inserting ({x},{y}) would create a cycle")
        if dag.has_edge(x, y):
            raise ValueError(f"edge ({x},{y}) already present")
        desc = list(closure.desc)
        anc = list(closure.anc)
        add_desc = closure.desc[y] | (1 << y)
        desc[x] |= add_desc
        for u in _iter_bits(closure.anc[x]):
            desc[u] |= add_desc
        add_anc = closure.anc[x] | (1 << x)
        anc[y] |= add_anc
        for v in _iter_bits(closure.desc[y]):
            anc[v] |= add_anc
        return ReachMatrix(dag.node_count, tuple(desc), tuple(anc))

    if kind == DELETE:
        if not dag.has_edge(x, y):
            raise ValueError(f"edge ({x},{y}) not present")
        return _closure_after_delete(dag, closure, x, y)

    if kind == REVERSE:
        if not dag.has_edge(x, y):
            raise ValueError(f"edge ({x},{y}) not present")
        mid = _closure_after_delete(dag, closure, x, y)
        if mid.reaches(x, y):
            raise CycleWouldForm(f"reversing ({x},{y}) would create a cycle")
        desc = list(mid.desc)
        anc = list(mid.anc)
        add_desc = mid.desc[x] | (1 << x)
        desc[y] |= add_desc
        for u in _iter_bits(mid.anc[y]):
            desc[u] |= add_desc
        add_anc = mid.anc[y] | (1 << y)
        anc[x] |= add_anc
        for v in _iter_bits(mid.desc[x]):
            anc[v] |= add_anc
        return ReachMatrix(dag.node_count, tuple(desc), tuple(anc))

    raise ValueError(f"unknown move kind {kind!r}")


def _closure_after_delete(dag: Dag, closure: ReachMatrix, x: int, y: int) -> ReachMatrix:
    # Only pairs (u, v) with u in {x} + anc(x) and v in {y} + desc(y) can
    # lose reachability; re-derive those rows/columns from the edited
    # adjacency, children processed before their parents.
    n = dag.node_count
    desc = list(closure.desc)
    anc = list(closure.anc)
    sources = closure.anc[x] | (1 << x)
    targets = closure.desc[y] | (1 << y)
    topo = dag.topological_order()
    for u in reversed(topo):
        if not (sources >> u) & 1:
            continue
        m = 0
        for c in dag.children(u):
            if u == x and c == y:
                continue
            m |= (1 << c) | desc[c]
        desc[u] = m
    for v in topo:
        if not (targets >> v) & 1:
            continue
        m = 0
        for p in dag.parents(v):
            if v == y and p == x:
                continue
            m |= (1 << p) | anc[p]
        anc[v] = m
    return ReachMatrix(n, tuple(desc), tuple(anc))


def _skeleton(dag: Dag) -> frozenset[tuple[int, int]]:
    return frozenset((min(x, y), max(x, y)) for x, y in dag.edges)


def _unshielded_colliders(dag: Dag) -> frozenset[tuple[int, int, int]]:
    adj = _skeleton(dag)
    out = set()
    for y in range(dag.node_count):
        ps = sorted(dag.parents(y))
        for i in range(len(ps)):
            for j in range(i + 1, len(ps)):
                a, b = ps[i], ps[j]
                if (a, b) not in adj:
                    out.add((a, y, b))
    return frozenset(out)


def markov_equivalent(d1: Dag, d2: Dag) -> bool:
    """Same skeleton and same unshielded colliders."""
    if d1.node_count != d2.node_count:
        raise NodeSetMismatch("graphs have different node counts")
    if d1.node_names is not None and d2.node_names is not None \
            and d1.node_names != d2.node_names:
        raise NodeSetMismatch("graphs have different node names")
    return _skeleton(d1) == _skeleton(d2) and \
        _unshielded_colliders(d1) == _unshielded_colliders(d2)


def dag_to_cpdag(dag: Dag) -> Pdag:
    """Essential graph of the DAG's Markov-equivalence class.

    Uses the classic compelled-edge labeling over a total edge ordering:
    edges are visited sorted by head (topological position ascending) and
    tail (descending), and each is labeled compelled or reversible by the
    three-rule procedure.
    """
    pos = {v: i for i, v in enumerate(dag.topological_order())}
    edges = sorted(dag.edges, key=lambda e: (pos[e[1]], -pos[e[0]]))
    label: dict[tuple[int, int], bool] = {}  # True = compelled
    for x, y in edges:
        if (x, y) in label:
            continue
        parents_y = dag.parents(y)
        parents_x = dag.parents(x)
        decided = False
        for w in sorted(parents_x, key=lambda v: pos[v]):
            if label.get((w, x)) is True:
                if w not in parents_y:
                    for p in parents_y:
                        label[(p, y)] = True
                    decided = True
                    break
                label[(w, y)] = True
        if decided:
            continue
        if any(z != x and z not in parents_x for z in parents_y):
            for p in parents_y:
                if (p, y) not in label:
                    label[(p, y)] = True
        else:
            for p in parents_y:
                if (p, y) not in label:
                    label[(p, y)] = False
    directed = {e for e, compelled in label.items() if compelled}
    undirected = {e for e, compelled in label.items() if not compelled}
    return Pdag(dag.node_count, frozenset(directed), frozenset(undirected),
                dag.node_names)


def covered_edge_moves(dag: Dag) -> list[tuple[int, int]]:
    """Edges x->y with Pa(y) = Pa(x) + {x}; reversing one preserves the class."""
    out = []
    for x, y in sorted(dag.edges):
        if dag.parents(y) == dag.parents(x) | {x}:
            out.append((x, y))
    return out


def shd(p1: Pdag, p2: Pdag) -> int:
    """Structural Hamming distance: node pairs whose edge status differs."""
    if p1.node_count != p2.node_count:
        raise NodeSetMismatch("graphs have different node counts")
    if p1.node_names is not None and p2.node_names is not None \
            and p1.node_names != p2.node_names:
        raise NodeSetMismatch("graphs have different node names")
    n = p1.node_count
    total = 0
    for a in range(n):
        for b in range(a + 1, n):
            if p1.pair_status(a, b) != p2.pair_status(a, b):
                total += 1
    return total


# ---------------------------------------------------------------------------
# Graph text format: `A -> B` directed, `A -- B` undirected (PDAG only),
# `node A` for isolated nodes, `#` comments, UTF-8.

def format_graph(g: Dag | Pdag) -> str:
    names = g.names()
    lines = []
    if isinstance(g, Dag):
        directed = sorted(g.edges)
        undirected = []
    else:
        directed = sorted(g.directed)
        undirected = sorted(g.undirected)
    touched = set()
    for x, y in directed:
        lines.append(f"{names[x]} -> {names[y]}")
        touched.update((x, y))
    for x, y in undirected:
        lines.append(f"{names[x]} -- {names[y]}")
        touched.update((x, y))
    for v in range(g.node_count):
        if v not in touched:
            lines.append(f"node {names[v]}")
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> Pdag:
    """Parse the text graph format into a PDAG (nodes in appearance order)."""
    names: list[str] = []
    index: dict[str, int] = {}

    def node_id(tok: str) -> int:
        if tok not in index:
            index[tok] = len(names)
            names.append(tok)
        return index[tok]

    directed = set()
    undirected = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if len(toks) == 2 and toks[0] == "node":
            node_id(toks[1])
        elif len(toks) == 3 and toks[1] == "->":
            directed.add((node_id(toks[0]), node_id(toks[2])))
        elif len(toks) == 3 and toks[1] == "--":
            undirected.add((node_id(toks[0]), node_id(toks[2])))
        else:
            raise ParseError(f"unrecognized graph line: {raw.strip()!r}", line=lineno)
    try:
        return Pdag(len(names), frozenset(directed), frozenset(undirected),
                    tuple(names))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def parse_dag(text: str) -> Dag:
    p = parse_graph(text)
    if p.undirected:
        raise ParseError("undirected edges are not allowed in a DAG file")
    return Dag(p.node_count, p.directed, p.node_names)


def reindex_pdag(p: Pdag, names: tuple[str, ...]) -> Pdag:
    """Re-map a named PDAG onto the node order given by ``names``."""
    own = p.names()
    if set(own) != set(names):
        raise NodeSetMismatch(f"node names differ: {sorted(own)} vs {sorted(names)}")
    remap = {own_i: names.index(own_name) for own_i, own_name in enumerate(own)}
    directed = frozenset((remap[x], remap[y]) for x, y in p.directed)
    undirected = frozenset((remap[x], remap[y]) for x, y in p.undirected)
    return Pdag(p.node_count, directed, undirected, tuple(names))
