"""SL graphs: DAGs whose nodes carry a role (chance, sensitive, target,
prediction, utility), plus d-separation, requisite features and the
graphical incentive criteria for introduced variation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence


class GraphError(ValueError):
    """Raised when a graph query's preconditions are violated."""


class NodeRole(str, Enum):
    CHANCE = "chance"
    SENSITIVE = "sensitive"
    TARGET = "target"
    PREDICTION = "prediction"
    UTILITY = "utility"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


class SLGraph:
    """
    Directed acyclic graph with node roles.

    Nodes are string ids; their position in ``nodes`` fixes the total order
    used for tie-breaking (topological order, parent order, witness paths).

    Parameters
    ----------
    nodes:
        Sequence of ``(id, role)`` pairs. Roles may be :class:`NodeRole`
        members or their string values.
    edges:
        Iterable of ``(parent, child)`` pairs.

    Examples
    --------
    >>> g = SLGraph([("A", "sensitive"), ("D", "chance"), ("Y", "target"),
    ...              ("Yhat", "prediction"), ("U", "utility")],
    ...             [("A", "D"), ("D", "Y"), ("D", "Yhat"), ("Y", "U"), ("Yhat", "U")])
    >>> sorted(requisite_features(g))
    ['D']
    """

    def __init__(self, nodes: Sequence[tuple[str, NodeRole | str]], edges: Iterable[tuple[str, str]]):
        ids = [str(n) for n, _ in nodes]
        if len(set(ids)) != len(ids):
            raise GraphError("duplicate node ids")
        self._nodes: tuple[str, ...] = tuple(ids)
        self._index = {n: i for i, n in enumerate(ids)}
        self._roles = {str(n): NodeRole(r) for n, r in nodes}
        edge_set = set()
        for u, v in edges:
            u, v = str(u), str(v)
            if u not in self._index or v not in self._index:
                raise GraphError(f"edge {u}->{v} references an unknown node")
            if u == v:
                raise GraphError(f"self loop on {u}")
            edge_set.add((u, v))
        self._edges = frozenset(edge_set)
        parents = {n: [] for n in ids}
        children = {n: [] for n in ids}
        for u, v in self._edges:
            parents[v].append(u)
            children[u].append(v)
        self._parents = {n: tuple(sorted(ps, key=self._index.__getitem__)) for n, ps in parents.items()}
        self._children = {n: tuple(sorted(cs, key=self._index.__getitem__)) for n, cs in children.items()}
        self._topo = self._topological_order()

    # basic accessors

    @property
    def nodes(self) -> tuple[str, ...]:
        return self._nodes

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        return self._edges

    def role(self, node: str) -> NodeRole:
        return self._roles[node]

    def roles(self) -> dict[str, NodeRole]:
        return dict(self._roles)

    def index(self, node: str) -> int:
        return self._index[node]

    def parents(self, node: str) -> tuple[str, ...]:
        return self._parents[node]

    def children(self, node: str) -> tuple[str, ...]:
        return self._children[node]

    def sort_nodes(self, nodes: Iterable[str]) -> list[str]:
        return sorted(nodes, key=self._index.__getitem__)

    def nodes_with_role(self, role: NodeRole | str) -> list[str]:
        role = NodeRole(role)
        return [n for n in self._nodes if self._roles[n] is role]

    def _single(self, role: NodeRole) -> str:
        found = self.nodes_with_role(role)
        if len(found) != 1:
            raise GraphError(f"expected exactly one {role.value} node, found {len(found)}")
        return found[0]

    @property
    def target(self) -> str:
        return self._single(NodeRole.TARGET)

    @property
    def prediction(self) -> str:
        return self._single(NodeRole.PREDICTION)

    @property
    def utility(self) -> str:
        return self._single(NodeRole.UTILITY)

    @property
    def sensitive(self) -> str:
        found = self.nodes_with_role(NodeRole.SENSITIVE)
        if not found:
            raise GraphError("graph has no sensitive node")
        if len(found) > 1:
            raise GraphError("graph has more than one sensitive node")
        return found[0]

    @property
    def has_sensitive(self) -> bool:
        return bool(self.nodes_with_role(NodeRole.SENSITIVE))

    @property
    def features(self) -> tuple[str, ...]:
        """Parents of the prediction node."""
        return self.parents(self.prediction)

    def __eq__(self, other):
        if not isinstance(other, SLGraph):
            return NotImplemented
        return (self._nodes == other._nodes and self._roles == other._roles
                and self._edges == other._edges)

    def __hash__(self):
        return hash((self._nodes, tuple(self._roles[n] for n in self._nodes), self._edges))

    def __repr__(self):
        edges = ", ".join(f"{u}->{v}" for u, v in self.sorted_edges())
        return f"SLGraph({edges})"

    def sorted_edges(self) -> list[tuple[str, str]]:
        return sorted(self._edges, key=lambda e: (self._index[e[0]], self._index[e[1]]))

    # derived graphs

    def with_edges(self, add: Iterable[tuple[str, str]] = (), remove: Iterable[tuple[str, str]] = ()) -> "SLGraph":
        edges = (set(self._edges) | set(add)) - set(remove)
        return SLGraph([(n, self._roles[n]) for n in self._nodes], edges)

    # order / ancestry

    def _topological_order(self) -> tuple[str, ...] | None:
        indeg = {n: len(self._parents[n]) for n in self._nodes}
        ready = [n for n in self._nodes if indeg[n] == 0]
        order = []
        while ready:
            ready.sort(key=self._index.__getitem__)
            n = ready.pop(0)
            order.append(n)
            for c in self._children[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != len(self._nodes):
            return None
        return tuple(order)

    @property
    def is_acyclic(self) -> bool:
        return self._topo is not None

    def topological_order(self) -> tuple[str, ...]:
        """Topological order, ties broken by node position."""
        if self._topo is None:
            raise GraphError("graph contains a cycle")
        return self._topo

    def ancestors(self, nodes: Iterable[str]) -> set[str]:
        """Ancestors of ``nodes``, including the nodes themselves."""
        out = set(nodes)
        stack = list(out)
        while stack:
            for p in self._parents[stack.pop()]:
                if p not in out:
                    out.add(p)
                    stack.append(p)
        return out

    def descendants(self, nodes: Iterable[str]) -> set[str]:
        """Descendants of ``nodes``, including the nodes themselves."""
        out = set(nodes)
        stack = list(out)
        while stack:
            for c in self._children[stack.pop()]:
                if c not in out:
                    out.add(c)
                    stack.append(c)
        return out


def validate_sl_graph(graph: SLGraph) -> ValidationReport:
    """Check the structural rules every SL graph must obey."""
    problems = []
    if not graph.is_acyclic:
        problems.append("graph contains a cycle")
    counts = {role: graph.nodes_with_role(role) for role in NodeRole}
    for role in (NodeRole.TARGET, NodeRole.PREDICTION, NodeRole.UTILITY):
        if len(counts[role]) != 1:
            problems.append(f"expected exactly one {role.value} node, found {len(counts[role])}")
    if len(counts[NodeRole.SENSITIVE]) > 1:
        problems.append(f"at most one sensitive node allowed, found {len(counts[NodeRole.SENSITIVE])}")
    if len(counts[NodeRole.UTILITY]) == 1 and len(counts[NodeRole.TARGET]) == 1 and len(counts[NodeRole.PREDICTION]) == 1:
        u, y, yhat = counts[NodeRole.UTILITY][0], counts[NodeRole.TARGET][0], counts[NodeRole.PREDICTION][0]
        if set(graph.parents(u)) != {y, yhat}:
            problems.append(f"Utility parents must be exactly {{Y, Ŷ}} = {{{y}, {yhat}}}, got {set(graph.parents(u)) or '{}'}")
        if graph.children(u):
            problems.append(f"Utility node {u} must have no children")
        extra = [c for c in graph.children(yhat) if c != u]
        if extra:
            problems.append(f"Prediction child other than Utility: {yhat}->{extra[0]}")
    return ValidationReport(tuple(problems))


def _check_disjoint(*sets):
    seen = set()
    for s in sets:
        if seen & s:
            raise GraphError(f"node sets must be pairwise disjoint; overlap {sorted(seen & s)}")
        seen |= s


def _as_set(graph: SLGraph, nodes) -> set[str]:
    if isinstance(nodes, str):
        nodes = [nodes]
    out = set(nodes)
    unknown = out - set(graph.nodes)
    if unknown:
        raise GraphError(f"unknown nodes {sorted(unknown)}")
    return out


def reachable(graph: SLGraph, sources: Iterable[str], given: Iterable[str] = ()) -> set[str]:
    """Nodes d-connected to ``sources`` given ``given`` (Bayes-ball traversal).

    Conditioned nodes are never reported as reachable.
    """
    z = set(given)
    anc_z = graph.ancestors(z)
    # "up": arrived from a child; "down": arrived from a parent
    stack = [(s, "up") for s in sources]
    visited = set()
    found = set()
    while stack:
        v, d = stack.pop()
        if (v, d) in visited:
            continue
        visited.add((v, d))
        if v not in z:
            found.add(v)
        if d == "up" and v not in z:
            stack.extend((p, "up") for p in graph.parents(v))
            stack.extend((c, "down") for c in graph.children(v))
        elif d == "down":
            if v not in z:
                stack.extend((c, "down") for c in graph.children(v))
            if v in anc_z:
                stack.extend((p, "up") for p in graph.parents(v))
    return found


def d_separated(graph: SLGraph, x, y, z=()) -> bool:
    """True iff ``z`` d-separates node set ``x`` from node set ``y``."""
    x, y, z = _as_set(graph, x), _as_set(graph, y), _as_set(graph, z)
    _check_disjoint(x, y, z)
    return not (reachable(graph, x, z) & y)


def d_connected(graph: SLGraph, x, y, z=()) -> bool:
    return not d_separated(graph, x, y, z)


def _triple_active(graph: SLGraph, a: str, b: str, c: str, z: set[str], anc_z: set[str]) -> bool:
    collider = (a, b) in graph.edges and (c, b) in graph.edges
    if collider:
        return b in anc_z
    return b not in z


def active_paths(graph: SLGraph, x: str, y: str, given: Iterable[str] = (),
                 avoid: Iterable[str] = ()) -> Iterator[tuple[str, ...]]:
    """Yield every simple path from ``x`` to ``y`` that ``given`` leaves unblocked.

    Exponential in the worst case; meant for witnesses on small graphs.
    """
    z = set(given)
    anc_z = graph.ancestors(z)
    avoid = set(avoid)
    if x == y:
        yield (x,)
        return

    def neighbours(v):
        return graph.sort_nodes(set(graph.parents(v)) | set(graph.children(v)))

    def extend(path, on_path):
        v = path[-1]
        for w in neighbours(v):
            if w in on_path or w in avoid:
                continue
            if len(path) >= 2 and not _triple_active(graph, path[-2], v, w, z, anc_z):
                continue
            if w == y:
                yield path + (w,)
                continue
            on_path.add(w)
            yield from extend(path + (w,), on_path)
            on_path.discard(w)

    yield from extend((x,), {x})


def _path_key(graph: SLGraph, path: Sequence[str]):
    return (len(path), [graph.index(n) for n in path])


def shortest_active_path(graph: SLGraph, x: str, y: str, given: Iterable[str] = ()) -> tuple[str, ...] | None:
    """Shortest active path, ties broken lexicographically by node position."""
    best = None
    for p in active_paths(graph, x, y, given):
        if best is None or _path_key(graph, p) < _path_key(graph, best):
            best = p
    return best


def format_path(graph: SLGraph, path: Sequence[str]) -> str:
    parts = [path[0]]
    for a, b in zip(path, path[1:]):
        parts.append("->" if (a, b) in graph.edges else "<-")
        parts.append(b)
    return " ".join(parts)


def requisite_features(graph: SLGraph) -> set[str]:
    """Features that stay d-connected to the utility given Ŷ and the other features."""
    yhat, u = graph.prediction, graph.utility
    feats = set(graph.parents(yhat))
    return {w for w in feats if d_connected(graph, {w}, {u}, (feats | {yhat}) - {w})}


@dataclass(frozen=True)
class CriterionResult:
    satisfied: bool
    feature: str | None = None
    path: tuple[str, ...] | None = None
    notes: tuple[str, ...] = field(default=())

    def __bool__(self):
        return self.satisfied


def itv_criterion(graph: SLGraph) -> CriterionResult:
    """Some requisite feature is d-connected to the sensitive node (empty conditioning set)."""
    a = graph.sensitive
    candidates = []
    for w in graph.sort_nodes(requisite_features(graph)):
        if w == a:
            candidates.append((w, (a,)))
        elif d_connected(graph, {a}, {w}):
            candidates.append((w, shortest_active_path(graph, a, w)))
    if not candidates:
        return CriterionResult(False)
    w, path = min(candidates, key=lambda c: (_path_key(graph, c[1]), graph.index(c[0])))
    return CriterionResult(True, w, path)


def padmissible_itv_criterion(graph: SLGraph) -> bool:
    """Theorem-1 criterion plus: A is not a feature and A is d-connected to U given the features."""
    a = graph.sensitive
    if not itv_criterion(graph):
        return False
    feats = set(graph.features)
    if a in feats:
        return False
    return d_connected(graph, {a}, {graph.utility}, feats)


def padmissible_extra_condition(graph: SLGraph) -> bool:
    """The part of the P-admissible criterion that goes beyond the ITV criterion."""
    a = graph.sensitive
    feats = set(graph.features)
    return a not in feats and d_connected(graph, {a}, {graph.utility}, feats)


class EdgeSubgraph:
    """A subset of a graph's edges selecting the paths an effect may travel along."""

    def __init__(self, graph: SLGraph, edges: Iterable[tuple[str, str]]):
        edges = frozenset((str(u), str(v)) for u, v in edges)
        missing = edges - graph.edges
        if missing:
            raise GraphError(f"edges not in graph: {sorted(missing)}")
        self.graph = graph
        self.edges = edges

    @classmethod
    def from_paths(cls, graph: SLGraph, paths: Iterable[Sequence[str]]) -> "EdgeSubgraph":
        edges = set()
        for p in paths:
            edges.update(zip(p, p[1:]))
        return cls(graph, edges)

    @classmethod
    def all_edges(cls, graph: SLGraph) -> "EdgeSubgraph":
        return cls(graph, graph.edges)

    def __contains__(self, edge) -> bool:
        return tuple(edge) in self.edges

    def __iter__(self):
        return iter(sorted(self.edges, key=lambda e: (self.graph.index(e[0]), self.graph.index(e[1]))))

    def __len__(self):
        return len(self.edges)

    def __eq__(self, other):
        if isinstance(other, EdgeSubgraph):
            return self.edges == other.edges and self.graph == other.graph
        return NotImplemented

    def __repr__(self):
        return "EdgeSubgraph({" + ", ".join(f"{u}->{v}" for u, v in self) + "})"


def _directed_path_search(graph: SLGraph, start: str, goal: str, edges: frozenset) -> tuple[str, ...] | None:
    """BFS shortest directed path using only ``edges``; lexicographic tie-break."""
    prev = {start: None}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        if v == goal:
            break
        for c in graph.children(v):
            if (v, c) in edges and c not in prev:
                prev[c] = v
                queue.append(c)
    if goal not in prev:
        return None
    path = [goal]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return tuple(reversed(path))


def psie_criterion(graph: SLGraph, subgraph: EdgeSubgraph) -> CriterionResult:
    """Whether the subgraph holds a directed path A ⇢ W → Ŷ through a requisite feature W."""
    if subgraph.graph != graph:
        raise GraphError("edge subgraph belongs to a different graph")
    a, yhat = graph.sensitive, graph.prediction
    best = None
    for w in graph.sort_nodes(requisite_features(graph)):
        if (w, yhat) not in subgraph:
            continue
        head = (a,) if w == a else _directed_path_search(graph, a, w, subgraph.edges)
        if head is None:
            continue
        path = head + (yhat,)
        if best is None or _path_key(graph, path) < _path_key(graph, best):
            best = path
    if best is None:
        return CriterionResult(False)
    return CriterionResult(True, best[-2], best)


def directed_paths_via(graph: SLGraph, mediator: str) -> EdgeSubgraph:
    """Edges on directed paths A ⇢ X ⇢ Ŷ and A ⇢ X ⇢ Y for mediator X."""
    a, y, yhat = graph.sensitive, graph.target, graph.prediction
    if mediator not in graph.nodes:
        raise GraphError(f"unknown node {mediator}")
    if mediator in (a, y, yhat):
        raise GraphError("mediator must differ from the sensitive, target and prediction nodes")
    from_a = graph.descendants({a})
    if mediator not in from_a:
        return EdgeSubgraph(graph, ())
    to_x = graph.ancestors({mediator})
    edges = set()
    reached_end = False
    for end in (yhat, y):
        to_end = graph.ancestors({end})
        if mediator not in to_end:
            continue
        reached_end = True
        from_x = graph.descendants({mediator})
        edges |= {(u, v) for u, v in graph.edges if u in from_x and v in from_x and v in to_end}
    if reached_end:
        edges |= {(u, v) for u, v in graph.edges if u in from_a and v in to_x and u in to_x}
    return EdgeSubgraph(graph, edges)
