"""Finite-domain structural causal models and exact inference.

Every endogenous node V has its own independent exogenous variable E_V with a
finite domain, and a total function table ``f_V(pa, e)``.  Inference is exact:
because the exogenous variables are independent and each feeds exactly one
function, summing E_V out while propagating in topological order yields the
same table as enumerating the full exogenous product space, at a fraction of
the cost.  :func:`enumerate_exogenous` keeps the literal enumeration around as
a reference.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from numbers import Real
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .graph import EdgeSubgraph, GraphError, NodeRole, SLGraph, validate_sl_graph

DEFAULT_CAPACITY = 10**8
ATOL = 1e-9


class ModelError(ValueError):
    """Malformed model definition."""


class CapacityError(RuntimeError):
    """The exact computation would exceed the configured state-space cap."""


class UndefinedConditionalError(ZeroDivisionError):
    """Conditioning on an event of probability zero."""


def is_numeric(value) -> bool:
    return isinstance(value, Real) and not isinstance(value, bool)


@dataclass(frozen=True)
class GroupSpec:
    """Baseline group ``a0`` and marginalised group ``a1`` of the sensitive attribute."""
    a0: Any
    a1: Any

    def __post_init__(self):
        if self.a0 == self.a1:
            raise ModelError("a0 and a1 must be distinct")

    def swapped(self) -> "GroupSpec":
        return GroupSpec(self.a1, self.a0)


@dataclass(frozen=True)
class ExogenousSpec:
    domain: tuple
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.domain) != len(self.probs) or not self.domain:
            raise ModelError("exogenous domain and probability vector must be non-empty and aligned")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > 1e-12:
            raise ModelError(f"exogenous probabilities must be non-negative and sum to 1, got {self.probs}")

    @classmethod
    def point(cls) -> "ExogenousSpec":
        return cls((0,), (1.0,))


@dataclass(frozen=True)
class LossSpec:
    """Loss attached to the utility node; ``utility`` returns f_U(y, ŷ)."""
    kind: str  # "zero_one" | "mse" | "table"
    table: Mapping[tuple, float] | None = None

    def __post_init__(self):
        if self.kind not in ("zero_one", "mse", "table"):
            raise ModelError(f"unknown loss kind {self.kind!r}")
        if self.kind == "table" and not self.table:
            raise ModelError("table loss needs a utility table")

    @classmethod
    def zero_one(cls):
        return cls("zero_one")

    @classmethod
    def mse(cls):
        return cls("mse")

    def utility(self, y, yhat) -> float:
        if self.kind == "zero_one":
            return 0.0 if y == yhat else -1.0
        if self.kind == "mse":
            return -float(y - yhat) ** 2
        try:
            return float(self.table[(y, yhat)])
        except KeyError:
            raise ModelError(f"loss table has no entry for (y={y!r}, yhat={yhat!r})") from None


class JointTable:
    """Dense probability table over a list of variables with finite domains.

    Axis ``i`` of ``probs`` indexes ``domains[i]``.  ``roles`` maps role names
    ("sensitive", "target", "prediction") to variable names when known.
    """

    def __init__(self, variables: Sequence[str], domains: Sequence[Sequence], probs,
                 roles: Mapping[str, str] | None = None, coupling_dependent: bool = False):
        self.variables = tuple(variables)
        self.domains = tuple(tuple(d) for d in domains)
        self.probs = np.asarray(probs, dtype=float)
        if self.probs.shape != tuple(len(d) for d in self.domains):
            raise ModelError(f"probability array shape {self.probs.shape} does not match domains")
        self.roles = dict(roles or {})
        self.coupling_dependent = coupling_dependent

    def __repr__(self):
        return f"JointTable({', '.join(self.variables)}; mass={self.probs.sum():.12g})"

    def axis(self, var: str) -> int:
        try:
            return self.variables.index(var)
        except ValueError:
            raise KeyError(f"variable {var!r} not in table") from None

    def domain(self, var: str) -> tuple:
        return self.domains[self.axis(var)]

    def role(self, role: str) -> str:
        return self.roles[role]

    def total(self) -> float:
        return float(self.probs.sum())

    def marginal(self, variables: Sequence[str]) -> "JointTable":
        variables = list(variables)
        axes = [self.axis(v) for v in variables]
        drop = tuple(i for i in range(len(self.variables)) if i not in axes)
        p = self.probs.sum(axis=drop)
        kept = [i for i in range(len(self.variables)) if i in axes]
        p = p.transpose([kept.index(a) for a in axes])
        return JointTable(variables, [self.domains[a] for a in axes], p,
                          {r: v for r, v in self.roles.items() if v in variables})

    def _event_mask(self, given: Mapping[str, Any]) -> np.ndarray:
        mask = np.ones(self.probs.shape, dtype=bool)
        for var, val in given.items():
            ax = self.axis(var)
            dom = self.domains[ax]
            if val not in dom:
                raise ModelError(f"value {val!r} not in domain of {var}")
            sel = np.zeros(len(dom), dtype=bool)
            sel[dom.index(val)] = True
            shape = [1] * self.probs.ndim
            shape[ax] = len(dom)
            mask &= sel.reshape(shape)
        return mask

    def prob(self, assignment: Mapping[str, Any]) -> float:
        """Probability of a (partial) assignment."""
        return float(self.probs[self._event_mask(assignment)].sum())

    def condition(self, given: Mapping[str, Any]) -> "JointTable":
        """Table restricted to the event ``given`` and renormalised."""
        if not given:
            return self
        mask = self._event_mask(given)
        mass = float(self.probs[mask].sum())
        if mass <= 0.0:
            raise UndefinedConditionalError(f"conditioning event {dict(given)} has probability zero")
        return JointTable(self.variables, self.domains, np.where(mask, self.probs, 0.0) / mass, self.roles)

    def expectation(self, var: str, given: Mapping[str, Any] | None = None) -> float:
        dom = self.domain(var)
        if not all(is_numeric(v) for v in dom):
            raise ModelError(f"variable {var} is not real-valued")
        m = self.condition(given or {}).marginal([var]).probs
        return float(np.dot(m, np.asarray(dom, dtype=float)))

    def allclose(self, other: "JointTable", atol: float = ATOL) -> bool:
        if set(self.variables) != set(other.variables):
            return False
        other = other.marginal(self.variables)
        if other.domains != self.domains:
            return False
        return bool(np.allclose(self.probs, other.probs, atol=atol, rtol=0))

    def items(self):
        """Iterate ``(assignment tuple, probability)`` over non-zero cells."""
        for idx in zip(*np.nonzero(self.probs)):
            yield tuple(d[i] for d, i in zip(self.domains, idx)), float(self.probs[idx])


def query(joint: JointTable, target: Sequence[str] | str, given: Mapping[str, Any] | None = None) -> JointTable:
    """Conditional table P(target | given)."""
    if isinstance(target, str):
        target = [target]
    return joint.condition(given or {}).marginal(target)


def expectation(joint: JointTable, var: str, given: Mapping[str, Any] | None = None) -> float:
    """Conditional mean E(var | given)."""
    return joint.expectation(var, given)


# ---------------------------------------------------------------------------
# structural models


@dataclass(frozen=True)
class StructuralModel:
    """
    Finite SCM in structural form over an SL graph.

    ``functions[v]`` is an integer array of shape
    ``(|dom p1|, ..., |dom pk|, |dom E_v|)`` holding the *index* into
    ``domains[v]`` of ``f_v(p1, ..., pk, e)``; parents are in
    ``graph.parents(v)`` order.  The prediction node has no function (its
    behaviour comes from a bound policy) and the utility node is represented
    by ``loss`` alone.  ``origin[v]`` is ``"cpt"`` for nodes converted from
    conditional probability tables by the comonotone coupling, and
    ``cpts[v]`` then keeps the source table so it can be written back out
    unchanged.
    """
    graph: SLGraph
    domains: Mapping[str, tuple]
    exogenous: Mapping[str, ExogenousSpec]
    functions: Mapping[str, np.ndarray]
    loss: LossSpec = field(default_factory=LossSpec.zero_one)
    groups: GroupSpec | None = None
    origin: Mapping[str, str] = field(default_factory=dict)
    cpts: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        report = validate_sl_graph(self.graph)
        if not report.ok:
            raise ModelError("; ".join(report.violations))
        g = self.graph
        for v in self.chance_nodes:
            if v not in self.domains or not self.domains[v]:
                raise ModelError(f"node {v} needs a non-empty domain")
            if len(set(self.domains[v])) != len(self.domains[v]):
                raise ModelError(f"domain of {v} has repeated values")
            f = self.functions.get(v)
            if f is None:
                raise ModelError(f"node {v} has no structural function")
            shape = tuple(len(self.domains[p]) for p in g.parents(v)) + (len(self.exogenous[v].domain),)
            if f.shape != shape:
                raise ModelError(f"function table of {v} has shape {f.shape}, expected {shape}")
            if f.size and (f.min() < 0 or f.max() >= len(self.domains[v])):
                raise ModelError(f"function table of {v} maps outside its domain")
        yhat = g.prediction
        for p in g.parents(yhat):
            if p not in self.domains:
                raise ModelError(f"feature {p} needs a domain")
        if g.has_sensitive and self.groups is not None:
            dom_a = self.domains[g.sensitive]
            if self.groups.a0 not in dom_a or self.groups.a1 not in dom_a:
                raise ModelError("groups a0/a1 must be values of the sensitive attribute")

    @property
    def chance_nodes(self) -> list[str]:
        """Nodes carrying a structural function (everything but Ŷ and U)."""
        g = self.graph
        return [v for v in g.topological_order()
                if g.role(v) not in (NodeRole.PREDICTION, NodeRole.UTILITY)]

    @property
    def prediction_domain(self) -> tuple:
        return tuple(self.domains.get(self.graph.prediction, ()))

    def feature_rows(self) -> list[tuple]:
        """All assignments to the prediction node's parents, in canonical order."""
        return list(itertools.product(*(self.domains[p] for p in self.graph.features)))

    def exogenous_states(self) -> int:
        return math.prod(len(self.exogenous[v].domain) for v in self.chance_nodes)

    def function_value(self, node: str, parent_values: Sequence, e_index: int):
        idx = tuple(self.domains[p].index(x) for p, x in zip(self.graph.parents(node), parent_values))
        return self.domains[node][int(self.functions[node][idx + (e_index,)])]

    def with_loss(self, loss: LossSpec) -> "StructuralModel":
        return replace(self, loss=loss)

    def with_prediction_domain(self, domain: Sequence) -> "StructuralModel":
        domains = dict(self.domains)
        domains[self.graph.prediction] = tuple(domain)
        return replace(self, domains=domains)

    def with_features(self, features: Iterable[str]) -> "StructuralModel":
        """Same model with the prediction node's parents replaced by ``features``."""
        g = self.graph
        yhat = g.prediction
        features = set(features)
        drop = {(p, yhat) for p in g.parents(yhat) if p not in features}
        add = {(p, yhat) for p in features}
        return replace(self, graph=g.with_edges(add=add, remove=drop))

    @classmethod
    def from_callables(cls, graph: SLGraph, domains: Mapping[str, Sequence],
                       mechanisms: Mapping[str, tuple[ExogenousSpec, Callable[[dict, Any], Any]]],
                       loss: LossSpec | None = None, groups: GroupSpec | None = None) -> "StructuralModel":
        """Tabulate python callables ``fn(parent_values: dict, e)`` into a model."""
        domains = {k: tuple(v) for k, v in domains.items()}
        functions, exogenous = {}, {}
        for v in _chance_nodes(graph):
            exo, fn = mechanisms[v]
            parents = graph.parents(v)
            shape = tuple(len(domains[p]) for p in parents) + (len(exo.domain),)
            table = np.empty(shape, dtype=np.int64)
            for idx in np.ndindex(*shape):
                pa = {p: domains[p][i] for p, i in zip(parents, idx[:-1])}
                val = fn(pa, exo.domain[idx[-1]])
                try:
                    table[idx] = domains[v].index(val)
                except ValueError:
                    raise ModelError(f"mechanism of {v} returned {val!r}, outside its domain") from None
            functions[v] = table
            exogenous[v] = exo
        return cls(graph, domains, exogenous, functions, loss or LossSpec.zero_one(), groups,
                   {v: "structural" for v in functions})


def _chance_nodes(graph: SLGraph) -> list[str]:
    return [v for v in graph.topological_order()
            if graph.role(v) not in (NodeRole.PREDICTION, NodeRole.UTILITY)]


# ---------------------------------------------------------------------------
# CPT canonicalisation

BREAKPOINT_TOL = 1e-12


def cpt_to_structural(rows: np.ndarray) -> tuple[ExogenousSpec, np.ndarray]:
    """Inverse-CDF (comonotone) structural form of a CPT.

    ``rows`` has shape ``(*parent_sizes, |dom V|)``.  The exogenous variable
    is a partition of the unit interval at the union of all row-cumulative
    breakpoints; the returned table maps each cell to the value whose CDF
    interval contains it.

    >>> exo, f = cpt_to_structural(np.array([[0.3, 0.7], [0.5, 0.5]]))
    >>> [round(p, 12) for p in exo.probs]
    [0.3, 0.2, 0.5]
    >>> f.tolist()
    [[0, 1, 1], [0, 0, 1]]
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim < 1 or rows.shape[-1] == 0:
        raise ModelError("CPT must have at least one value")
    if np.any(rows < -1e-12):
        raise ModelError("CPT has negative entries")
    sums = rows.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        bad = np.argwhere(np.abs(sums - 1.0) > 1e-9)[0]
        raise ModelError(f"CPT row {tuple(int(i) for i in bad)} sums to {sums[tuple(bad)]!r}, not 1")
    rows = np.clip(rows, 0.0, None)
    rows = rows / rows.sum(axis=-1, keepdims=True)
    cum = np.cumsum(rows, axis=-1)
    flat_cum = cum.reshape(-1, rows.shape[-1])
    points = np.sort(flat_cum[:, :-1].ravel())
    breaks = []
    for b in points:
        if b <= BREAKPOINT_TOL or b >= 1.0 - BREAKPOINT_TOL:
            continue
        if breaks and b - breaks[-1] <= BREAKPOINT_TOL:
            continue
        breaks.append(float(b))
    edges = np.array([0.0] + breaks + [1.0])
    masses = np.diff(edges)
    mids = (edges[:-1] + edges[1:]) / 2
    table = np.empty(rows.shape[:-1] + (len(masses),), dtype=np.int64)
    for idx in np.ndindex(*rows.shape[:-1]):
        c = cum[idx].copy()
        c[-1] = np.inf
        table[idx] = np.searchsorted(c, mids, side="right")
    masses = masses / masses.sum()
    return ExogenousSpec(tuple(range(len(masses))), tuple(float(m) for m in masses)), table


def from_cpts(graph: SLGraph, domains: Mapping[str, Sequence], cpts: Mapping[str, Any],
              loss: LossSpec | None = None, groups: GroupSpec | None = None) -> StructuralModel:
    """
    Build a structural model from conditional probability tables.

    Parameters
    ----------
    graph:
        A valid SL graph.
    domains:
        Value lists for every node except the utility node.  The prediction
        node's domain may be empty for real-valued scores.
    cpts:
        Per chance node, either an array of shape
        ``(*parent_sizes, |dom V|)`` or a mapping from parent-value tuples
        (in ``graph.parents`` order) to probability vectors.  Root nodes may
        pass a plain probability vector.

    Returns
    -------
    StructuralModel
        Observational and interventional distributions match the CPTs
        exactly; counterfactual quantities use the comonotone coupling.
    """
    domains = {k: tuple(v) for k, v in domains.items()}
    functions, exogenous, tables = {}, {}, {}
    for v in _chance_nodes(graph):
        if v not in cpts:
            raise ModelError(f"no CPT for node {v}")
        rows = cpt_array(graph, domains, v, cpts[v])
        exogenous[v], functions[v] = cpt_to_structural(rows)
        tables[v] = rows
    return StructuralModel(graph, domains, exogenous, functions, loss or LossSpec.zero_one(), groups,
                           {v: "cpt" for v in functions}, tables)


def cpt_array(graph: SLGraph, domains: Mapping[str, tuple], node: str, spec) -> np.ndarray:
    parents = graph.parents(node)
    shape = tuple(len(domains[p]) for p in parents) + (len(domains[node]),)
    if isinstance(spec, Mapping):
        arr = np.full(shape, np.nan)
        for key, probs in spec.items():
            if not isinstance(key, tuple):
                key = (key,)
            if len(key) != len(parents):
                raise ModelError(f"CPT key {key!r} of {node} does not match parents {parents}")
            try:
                idx = tuple(domains[p].index(k) for p, k in zip(parents, key))
            except ValueError:
                raise ModelError(f"CPT key {key!r} of {node} has a value outside its parent domains") from None
            probs = np.asarray(probs, dtype=float)
            if probs.shape != (len(domains[node]),):
                raise ModelError(f"CPT row {key!r} of {node} has {probs.size} entries, expected {len(domains[node])}")
            arr[idx] = probs
        if np.isnan(arr).any():
            missing = next(i for i in np.ndindex(*shape[:-1]) if np.isnan(arr[i]).any())
            raise ModelError(f"CPT of {node} misses row {tuple(domains[p][i] for p, i in zip(parents, missing))}")
        return arr
    arr = np.asarray(spec, dtype=float)
    if arr.shape != shape:
        raise ModelError(f"CPT of {node} has shape {arr.shape}, expected {shape}")
    return arr


def induced_cpt(model: StructuralModel, node: str) -> np.ndarray:
    """P(node | parents) implied by the structural function and its noise."""
    f = model.functions[node]
    w = np.asarray(model.exogenous[node].probs)
    onehot = np.eye(len(model.domains[node]))[f]  # (*pa, n_e, |dom|)
    return (onehot * w[:, None]).sum(axis=-2)


# ---------------------------------------------------------------------------
# policies as node mechanisms


def _policy_table(model: StructuralModel, policy) -> tuple[tuple, np.ndarray]:
    """Prediction domain used in joints and the policy's index table."""
    g = model.graph
    feats = g.features
    if tuple(policy.features) != tuple(feats):
        raise ModelError(f"policy features {policy.features} do not match model features {feats}")
    rows = model.feature_rows()
    values = []
    for row in rows:
        if row not in policy.table:
            raise ModelError(f"policy undefined on feature row {row}")
        values.append(policy.table[row])
    declared = model.prediction_domain
    if declared and all(v in declared for v in values):
        dom = declared
    else:
        dom = tuple(sorted(set(values), key=_sort_key))
    shape = tuple(len(model.domains[p]) for p in feats)
    table = np.array([dom.index(v) for v in values], dtype=np.int64).reshape(shape)
    return dom, table


def _sort_key(v):
    return (0, float(v), "") if is_numeric(v) else (1, 0.0, str(v))


def check_capacity(model: StructuralModel, capacity: int | None):
    cap = DEFAULT_CAPACITY if capacity is None else capacity
    n = model.exogenous_states()
    if n > cap:
        raise CapacityError(f"{n} joint exogenous states exceed the capacity of {cap}")


def _roles(model: StructuralModel, variables) -> dict[str, str]:
    g = model.graph
    roles = {}
    for role in (NodeRole.SENSITIVE, NodeRole.TARGET, NodeRole.PREDICTION):
        found = g.nodes_with_role(role)
        if found and found[0] in variables:
            roles[role.value] = found[0]
    return roles


def joint_distribution(model: StructuralModel, policy=None, capacity: int | None = None) -> JointTable:
    """
    Exact joint over the endogenous variables (utility excluded).

    With ``policy=None`` the prediction node is left out; this is the
    distribution optimal-policy solvers work from.
    """
    check_capacity(model, capacity)
    g = model.graph
    order = [v for v in g.topological_order() if g.role(v) is not NodeRole.UTILITY]
    if policy is None:
        order = [v for v in order if g.role(v) is not NodeRole.PREDICTION]
    labels: dict[str, int] = {}
    p = np.ones(())
    doms = []
    for k, v in enumerate(order):
        if g.role(v) is NodeRole.PREDICTION:
            dom, table = _policy_table(model, policy)
            kernel = np.eye(len(dom))[table]
        else:
            dom = model.domains[v]
            kernel = induced_cpt(model, v)
        parents = g.parents(v)
        labels[v] = k
        p = np.einsum(p, list(range(k)), kernel, [labels[q] for q in parents] + [k], list(range(k + 1)))
        doms.append(dom)
    return JointTable(order, doms, p, _roles(model, order))


def enumerate_exogenous(model: StructuralModel, policy=None, capacity: int | None = None) -> JointTable:
    """Reference joint by literal enumeration of every joint exogenous assignment."""
    check_capacity(model, capacity)
    g = model.graph
    nodes = model.chance_nodes
    order = [v for v in g.topological_order() if g.role(v) is not NodeRole.UTILITY]
    if policy is None:
        order = [v for v in order if g.role(v) is not NodeRole.PREDICTION]
    else:
        pred_dom, _ = _policy_table(model, policy)
    doms = [pred_dom if g.role(v) is NodeRole.PREDICTION else model.domains[v] for v in order]
    out = np.zeros(tuple(len(d) for d in doms))
    cells = [range(len(model.exogenous[v].domain)) for v in nodes]
    for assignment in itertools.product(*cells):
        e = dict(zip(nodes, assignment))
        weight = math.prod(model.exogenous[v].probs[e[v]] for v in nodes)
        if weight == 0.0:
            continue
        vals = {}
        for v in order:
            pa = tuple(vals[q] for q in g.parents(v))
            if g.role(v) is NodeRole.PREDICTION:
                vals[v] = policy.table[pa]
            else:
                vals[v] = model.function_value(v, pa, e[v])
        out[tuple(d.index(vals[v]) for d, v in zip(doms, order))] += weight
    return JointTable(order, doms, out, _roles(model, order))


def intervene(model: StructuralModel, assignment: Mapping[str, Any]) -> StructuralModel:
    """Model with each assigned node's function replaced by a constant."""
    g = model.graph
    functions = dict(model.functions)
    exogenous = dict(model.exogenous)
    origin = dict(model.origin)
    cpts = dict(model.cpts)
    for node, value in assignment.items():
        if node not in g.nodes:
            raise ModelError(f"unknown node {node}")
        if g.role(node) in (NodeRole.PREDICTION, NodeRole.UTILITY):
            raise ModelError(f"cannot intervene on the {g.role(node).value} node")
        dom = model.domains[node]
        if value not in dom:
            raise ModelError(f"value {value!r} is outside the domain of {node}")
        shape = tuple(len(model.domains[p]) for p in g.parents(node)) + (1,)
        functions[node] = np.full(shape, dom.index(value), dtype=np.int64)
        exogenous[node] = ExogenousSpec.point()
        origin[node] = "structural"
        cpts.pop(node, None)
    return replace(model, functions=functions, exogenous=exogenous, origin=origin, cpts=cpts)


def _node_mechanism(model: StructuralModel, v: str, policy, pred_dom_table):
    """(domain, function index table, exogenous weights) for any evaluated node."""
    if model.graph.role(v) is NodeRole.PREDICTION:
        dom, table = pred_dom_table
        return dom, table[..., None], np.ones(1)
    return model.domains[v], model.functions[v], np.asarray(model.exogenous[v].probs)


def path_specific_response(model: StructuralModel, policy, subgraph: EdgeSubgraph, a0, a1,
                           capacity: int | None = None) -> JointTable:
    """
    Distribution of the path-specific response V_{P(a0 -> a1)} for every node.

    Two passes share each exogenous draw u: a baseline pass under do(A=a0)
    and an active pass under do(A=a1) in which an input V -> X is read from
    the active pass when the edge is in ``subgraph`` and from the baseline
    pass otherwise.  The returned table marginalises out the baseline pass.
    ``coupling_dependent`` is set when the result depends on how a
    CPT-derived node's noise is shared between the two passes.
    """
    check_capacity(model, capacity)
    g = model.graph
    if subgraph.graph != g:
        raise GraphError("edge subgraph belongs to a different graph")
    a = g.sensitive
    dom_a = model.domains[a]
    if a0 not in dom_a or a1 not in dom_a:
        raise ModelError("a0 and a1 must be values of the sensitive attribute")
    order = [v for v in g.topological_order() if g.role(v) is not NodeRole.UTILITY]
    pred = _policy_table(model, policy) if policy is not None else None
    if pred is None:
        order = [v for v in order if g.role(v) is not NodeRole.PREDICTION]
    base_label, act_label = {}, {}
    p = np.ones(())
    n_axes = 0
    for v in order:
        b, c = n_axes, n_axes + 1
        n_axes += 2
        if v == a:
            kernel = np.zeros((len(dom_a), len(dom_a)))
            kernel[dom_a.index(a0), dom_a.index(a1)] = 1.0
            p = np.einsum(p, list(range(b)), kernel, [b, c], list(range(c + 1)))
        else:
            dom, f, w = _node_mechanism(model, v, policy, pred)
            parents = g.parents(v)
            onehot = np.eye(len(dom))[f]  # (*pa, n_e, |dom|)
            k = len(parents)
            # pair kernel over (baseline parents, active-pass parents, v_base, v_active)
            pair = np.einsum(onehot, list(range(k)) + [2 * k, 2 * k + 1],
                             onehot, list(range(k, 2 * k)) + [2 * k, 2 * k + 2],
                             w, [2 * k],
                             list(range(2 * k)) + [2 * k + 1, 2 * k + 2])
            in_labels = [base_label[q] for q in parents]
            in_labels += [act_label[q] if (q, v) in subgraph else base_label[q] for q in parents]
            p = np.einsum(p, list(range(b)), pair, in_labels + [b, c], list(range(c + 1)))
        base_label[v], act_label[v] = b, c
    node_doms = []
    for v in order:
        if g.role(v) is NodeRole.PREDICTION:
            node_doms.append(pred[0])
        else:
            node_doms.append(model.domains[v])
    flagged = _coupling_flag(model, subgraph, order, p, base_label, act_label)
    active = p.sum(axis=tuple(base_label[v] for v in order))
    return JointTable(order, node_doms, active, _roles(model, order), coupling_dependent=flagged)


def _coupling_flag(model, subgraph, order, p, base_label, act_label) -> bool:
    g = model.graph
    for v in order:
        if model.origin.get(v) != "cpt" or len(model.exogenous[v].domain) < 2:
            continue
        baseline_consumed = any((v, c) not in subgraph for c in g.children(v)
                                if g.role(c) is not NodeRole.UTILITY)
        if not baseline_consumed:
            continue
        switched = [q for q in g.parents(v) if (q, v) in subgraph]
        if not switched:
            continue
        axes = [base_label[q] for q in switched] + [act_label[q] for q in switched]
        drop = tuple(i for i in range(p.ndim) if i not in axes)
        m = p.sum(axis=drop)
        keep = sorted(axes)
        m = m.transpose([keep.index(x) for x in axes])
        k = len(switched)
        same = m.copy()
        for idx in np.ndindex(*m.shape):
            if idx[:k] == idx[k:]:
                same[idx] = 0.0
        if same.sum() > 1e-15:
            return True
    return False


@dataclass(frozen=True)
class PathSpecificEffect:
    value: float
    response_mean: float
    baseline_mean: float
    coupling_dependent: bool

    def __float__(self):
        return self.value


def path_specific_effect(model: StructuralModel, policy, subgraph: EdgeSubgraph, node: str, a0, a1,
                         capacity: int | None = None) -> PathSpecificEffect:
    a = model.graph.sensitive
    response = path_specific_response(model, policy, subgraph, a0, a1, capacity)
    baseline = joint_distribution(intervene(model, {a: a0}), policy, capacity)
    r, b = response.expectation(node), baseline.expectation(node)
    return PathSpecificEffect(r - b, r, b, response.coupling_dependent)


def pse(model: StructuralModel, policy, subgraph: EdgeSubgraph, node: str, a0, a1,
        capacity: int | None = None) -> float:
    """E(V_{P(a0->a1)}) - E(V_{a0})."""
    return path_specific_effect(model, policy, subgraph, node, a0, a1, capacity).value
