"""Worked examples, random SL models, the incidence experiment and witness models."""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Iterator

import numpy as np

from .graph import (GraphError, NodeRole, SLGraph, active_paths, itv_criterion,
                    padmissible_extra_condition, padmissible_itv_criterion, requisite_features,
                    validate_sl_graph)
from .metrics import itv_from_joint
from .policy import optimal_policies_bruteforce, solve
from .scm import (CapacityError, ExogenousSpec, GroupSpec, LossSpec, ModelError, StructuralModel,
                  from_cpts, joint_distribution)


class ExampleId(str, Enum):
    HIRING_V1 = "hiring_v1"
    HIRING_V2 = "hiring_v2"
    MUSIC = "music"
    MUSIC_WITH_A = "music_with_a"
    DEGREES = "degrees"
    DEGREES_CODING = "degrees_coding"


def _sl(nodes, edges):
    return SLGraph(nodes, edges)


def hiring_graph() -> SLGraph:
    return _sl([("A", "sensitive"), ("D", "chance"), ("Y", "target"), ("Yhat", "prediction"), ("U", "utility")],
               [("A", "D"), ("D", "Y"), ("D", "Yhat"), ("Y", "U"), ("Yhat", "U")])


def music_graph(with_a: bool = False) -> SLGraph:
    edges = [("A", "T"), ("M", "T"), ("M", "Y"), ("T", "Yhat"), ("Y", "U"), ("Yhat", "U")]
    if with_a:
        edges.append(("A", "Yhat"))
    return _sl([("A", "sensitive"), ("M", "chance"), ("T", "chance"), ("Y", "target"),
                ("Yhat", "prediction"), ("U", "utility")], edges)


def degrees_graph(coding: bool = False) -> SLGraph:
    if coding:
        return _sl([("A", "sensitive"), ("Coding", "chance"), ("Degree", "chance"), ("Y", "target"),
                    ("Yhat", "prediction"), ("U", "utility")],
                   [("A", "Coding"), ("A", "Degree"), ("Coding", "Y"), ("Degree", "Y"),
                    ("Degree", "Yhat"), ("Y", "U"), ("Yhat", "U")])
    return _sl([("A", "sensitive"), ("Degree", "chance"), ("Y", "target"), ("Yhat", "prediction"),
                ("U", "utility")],
               [("A", "Degree"), ("A", "Y"), ("Degree", "Y"), ("Degree", "Yhat"), ("Y", "U"), ("Yhat", "U")])


def load_example(example: ExampleId | str) -> tuple[StructuralModel, GroupSpec, LossSpec]:
    """Fully parameterised model, groups and loss for a worked example."""
    example = ExampleId(example)
    if example in (ExampleId.HIRING_V1, ExampleId.HIRING_V2):
        zero_one = example is ExampleId.HIRING_V2
        loss = LossSpec.zero_one() if zero_one else LossSpec.mse()
        groups = GroupSpec("male", "female")
        model = from_cpts(
            hiring_graph(),
            {"A": ("male", "female"), "D": ("maths", "stats"), "Y": (0, 1),
             "Yhat": (0, 1) if zero_one else ()},
            {"A": [0.5, 0.5],
             "D": {("male",): [0.8, 0.2], ("female",): [0.2, 0.8]},
             "Y": {("maths",): [0.49, 0.51], ("stats",): [0.51, 0.49]}},
            loss, groups)
        return model, groups, loss
    if example in (ExampleId.MUSIC, ExampleId.MUSIC_WITH_A):
        with_a = example is ExampleId.MUSIC_WITH_A
        loss = LossSpec.mse() if with_a else LossSpec.zero_one()
        groups = GroupSpec("male", "female")
        model = from_cpts(
            music_graph(with_a),
            {"A": ("male", "female"), "M": (0, 1), "T": (0, 1), "Y": (0, 1), "Yhat": () if with_a else (0, 1)},
            {"A": [0.5, 0.5],
             "M": [0.5, 0.5],
             # parents of T in graph order: A, M
             "T": {("male", 0): [0.95, 0.05], ("male", 1): [0.0, 1.0],
                   ("female", 0): [0.95, 0.05], ("female", 1): [0.1, 0.9]},
             "Y": {(0,): [0.95, 0.05], (1,): [0.05, 0.95]}},
            loss, groups)
        return model, groups, loss
    coding = example is ExampleId.DEGREES_CODING
    loss = LossSpec.mse()
    groups = GroupSpec("man", "woman")
    if coding:
        model = from_cpts(
            degrees_graph(coding=True),
            {"A": ("man", "woman"), "Coding": (0, 1), "Degree": ("maths", "stats"), "Y": (4, 6), "Yhat": ()},
            {"A": [0.5, 0.5],
             "Coding": {("man",): [0.2, 0.8], ("woman",): [0.8, 0.2]},
             "Degree": {("man",): [0.8, 0.2], ("woman",): [0.2, 0.8]},
             # both degrees score 5; coding experience adds 1, its absence subtracts 1
             "Y": {(c, d): ([0.0, 1.0] if c else [1.0, 0.0]) for c in (0, 1) for d in ("maths", "stats")}},
            loss, groups)
    else:
        model = from_cpts(
            degrees_graph(),
            {"A": ("man", "woman"), "Degree": ("maths", "stats"), "Y": (4, 6), "Yhat": ()},
            {"A": [0.5, 0.5],
             "Degree": {("man",): [0.8, 0.2], ("woman",): [0.2, 0.8]},
             "Y": {(a, d): ([0.0, 1.0] if a == "man" else [1.0, 0.0])
                   for a in ("man", "woman") for d in ("maths", "stats")}},
            loss, groups)
    return model, groups, loss


# ---------------------------------------------------------------------------
# random SL models


CRITERIA = ("theorem1", "theorem2", "not_theorem1", "not_theorem2_extra", "none")


@dataclass(frozen=True)
class ExperimentConfig:
    n_samples: int = 1000
    n_nodes: int = 6
    edge_prob: float = 0.4
    dirichlet_alpha: float = 1.0
    domain_size: int = 2
    loss: str = "zero_one"
    criterion: str | None = None
    itv_threshold: float = 0.01
    seed: int = 0
    max_attempts: int = 10**4
    workers: int = 1

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError("n_samples must be positive")
        if self.n_nodes < 4:
            raise ValueError("n_nodes counts Ŷ and U as well and must be at least 4")
        if not 0.0 <= self.edge_prob <= 1.0:
            raise ValueError("edge_prob must lie in [0, 1]")
        if self.dirichlet_alpha <= 0:
            raise ValueError("dirichlet_alpha must be positive")
        if self.domain_size < 2:
            raise ValueError("domain_size must be at least 2")
        if self.loss not in ("zero_one", "mse"):
            raise ValueError("loss must be zero_one or mse")
        if self.criterion is not None and self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")
        if self.itv_threshold < 0:
            raise ValueError("itv_threshold must be non-negative")
        if self.max_attempts <= 0 or self.workers <= 0:
            raise ValueError("max_attempts and workers must be positive")

    @property
    def effective_criterion(self) -> str:
        if self.criterion is not None:
            return self.criterion
        return "theorem1" if self.loss == "zero_one" else "theorem2"


def graph_meets(graph: SLGraph, criterion: str) -> bool:
    if criterion == "theorem1":
        return bool(itv_criterion(graph))
    if criterion == "theorem2":
        return padmissible_itv_criterion(graph)
    if criterion == "not_theorem1":
        return not itv_criterion(graph)
    if criterion == "not_theorem2_extra":
        return not padmissible_extra_condition(graph)
    if criterion == "none":
        return True
    raise ValueError(f"unknown criterion {criterion!r}")


def random_sl_graph(n_nodes: int, edge_prob: float, rng: np.random.Generator) -> SLGraph:
    """
    Random SL graph with ``n_nodes`` nodes in total (including Ŷ and U).

    Chance nodes sit at positions of a topological order; A and Y take two
    random positions and each forward pair is joined independently with
    ``edge_prob``.  Every other chance node (A included) feeds Ŷ independently
    with ``edge_prob``.
    """
    n_chance = n_nodes - 2
    a_pos, y_pos = rng.choice(n_chance, size=2, replace=False)
    names = []
    k = 0
    for pos in range(n_chance):
        if pos == a_pos:
            names.append(("A", NodeRole.SENSITIVE))
        elif pos == y_pos:
            names.append(("Y", NodeRole.TARGET))
        else:
            k += 1
            names.append((f"X{k}", NodeRole.CHANCE))
    edges = []
    for i in range(n_chance):
        for j in range(i + 1, n_chance):
            if rng.random() < edge_prob:
                edges.append((names[i][0], names[j][0]))
    for i in range(n_chance):
        if i != y_pos and rng.random() < edge_prob:
            edges.append((names[i][0], "Yhat"))
    edges += [("Y", "U"), ("Yhat", "U")]
    return SLGraph(names + [("Yhat", NodeRole.PREDICTION), ("U", NodeRole.UTILITY)], edges)


def random_cpts(graph: SLGraph, domains: dict, alpha: float, rng: np.random.Generator) -> dict:
    cpts = {}
    for v in graph.topological_order():
        if graph.role(v) in (NodeRole.PREDICTION, NodeRole.UTILITY):
            continue
        shape = tuple(len(domains[p]) for p in graph.parents(v))
        n = len(domains[v])
        rows = rng.dirichlet(np.full(n, alpha), size=int(np.prod(shape, dtype=int)))
        cpts[v] = rows.reshape(shape + (n,))
    return cpts


def random_sl_model(config: ExperimentConfig, rng: np.random.Generator,
                    criterion: str | None = None) -> tuple[StructuralModel, GroupSpec, int]:
    """
    Rejection-sample a random SL model whose graph meets ``criterion``.

    Returns the model, its groups (a0=0, a1=1) and the number of graph draws.
    """
    criterion = criterion or config.effective_criterion
    for attempt in range(1, config.max_attempts + 1):
        graph = random_sl_graph(config.n_nodes, config.edge_prob, rng)
        if not validate_sl_graph(graph).ok or not graph_meets(graph, criterion):
            continue
        values = tuple(range(config.domain_size))
        domains = {v: values for v in graph.nodes if graph.role(v) is not NodeRole.UTILITY}
        loss = LossSpec(config.loss)
        if loss.kind == "mse":
            domains["Yhat"] = ()
        groups = GroupSpec(0, 1)
        cpts = random_cpts(graph, domains, config.dirichlet_alpha, rng)
        return from_cpts(graph, domains, cpts, loss, groups), groups, attempt
    raise RuntimeError(f"no graph meeting {criterion} within {config.max_attempts} attempts")


def graph_hash(graph: SLGraph) -> str:
    text = ";".join(f"{n}:{graph.role(n).value}" for n in graph.nodes) + "|" + \
        ";".join(f"{u}>{v}" for u, v in graph.sorted_edges())
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class SampleRecord:
    index: int
    seed: list
    graph_hash: str
    attempts: int
    itv: float | None
    itv_max: float | None
    n_optima: int
    error: str | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    n_satisfying_criterion: int
    n_with_itv_above_threshold: int
    n_skipped: int
    records: list[SampleRecord] = field(default_factory=list)

    @property
    def fraction(self) -> float:
        if self.n_satisfying_criterion == 0:
            return 0.0
        return self.n_with_itv_above_threshold / self.n_satisfying_criterion

    def summary(self) -> dict:
        return {"config": asdict(self.config), "criterion": self.config.effective_criterion,
                "n_satisfying_criterion": self.n_satisfying_criterion,
                "n_with_itv_above_threshold": self.n_with_itv_above_threshold,
                "n_skipped": self.n_skipped, "fraction": self.fraction}


MAX_OPTIMA = 4096


def optimal_itv_range(model: StructuralModel, groups: GroupSpec) -> tuple[float, float, int]:
    """(min, max, count) of ITV over every optimal policy for the model's loss."""
    policies = solve(model)
    if len(policies) > MAX_OPTIMA:
        raise CapacityError(f"{len(policies)} optimal policies exceed {MAX_OPTIMA}")
    values = [itv_from_joint(joint_distribution(model, p), groups) for p in policies]
    return min(values), max(values), len(values)


def sample_seed(seed: int, index: int) -> list[int]:
    return [int(seed), int(index)]


def run_sample(config: ExperimentConfig, index: int) -> SampleRecord:
    seed = sample_seed(config.seed, index)
    rng = np.random.default_rng(seed)
    model, groups, attempts = random_sl_model(config, rng)
    try:
        lo, hi, n = optimal_itv_range(model, groups)
    except (CapacityError, ModelError, ZeroDivisionError) as exc:
        return SampleRecord(index, seed, graph_hash(model.graph), attempts, None, None, 0, str(exc))
    return SampleRecord(index, seed, graph_hash(model.graph), attempts, lo, hi, n)


def _worker_count(config: ExperimentConfig) -> int:
    env = os.environ.get("ITV_AUDIT_THREADS")
    workers = config.workers
    if env:
        workers = min(workers, max(1, int(env)))
    return workers


def itv_incidence(config: ExperimentConfig) -> ExperimentResult:
    """
    Fraction of criterion-satisfying random models whose optimal predictors
    all have ITV above ``config.itv_threshold``.

    Each sample draws from its own generator seeded by ``(seed, index)``, so
    results do not depend on worker count or scheduling.
    """
    workers = _worker_count(config)
    indices = range(config.n_samples)
    if workers == 1:
        records = [run_sample(config, i) for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_sample, [config] * config.n_samples, indices, chunksize=16))
    ok = [r for r in records if r.error is None]
    above = sum(1 for r in ok if r.itv > config.itv_threshold)
    return ExperimentResult(config, len(ok), above, len(records) - len(ok), records)


# ---------------------------------------------------------------------------
# witness models for the ITV criterion


class UnsupportedCase(GraphError):
    """The graph needs a completeness construction this module does not build."""


@dataclass(frozen=True)
class WitnessPlan:
    case: str
    feature: str
    source_path: tuple[str, ...]    # A ... T ... W
    label_path: tuple[str, ...]     # W ... Y
    chains: tuple[tuple[str, ...], ...] = ()  # collider -> ... -> observed feature


def _source_index(graph: SLGraph, path) -> int:
    """Index of the trek source on a collider-free path from A."""
    t = len(path) - 1
    for i in range(len(path) - 1):
        if (path[i], path[i + 1]) in graph.edges:
            t = i
            break
    return t


def _directed_forward(graph: SLGraph, path) -> bool:
    return all((u, v) in graph.edges for u, v in zip(path, path[1:]))


def _shortest_directed(graph: SLGraph, start: str, goals: set[str], avoid: set[str]):
    from collections import deque
    prev = {start: None}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        if v in goals:
            path = [v]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            return tuple(reversed(path))
        for c in graph.children(v):
            if c not in prev and c not in avoid:
                prev[c] = v
                queue.append(c)
    return None


def witness_plans(graph: SLGraph) -> Iterator[WitnessPlan]:
    """Candidate Case 1 / Case 2a decompositions, shortest first."""
    a, y, yhat, u = graph.sensitive, graph.target, graph.prediction, graph.utility
    feats = set(graph.features)
    plans = []
    for w in graph.sort_nodes(requisite_features(graph)):
        z = (feats | {yhat}) - {w}
        source_paths = [(a,)] if w == a else list(active_paths(graph, a, w))
        label_paths = list(active_paths(graph, w, y, z, avoid={u, yhat}))
        for sp in source_paths:
            t = _source_index(graph, sp)
            for lp in label_paths:
                if set(sp) & set(lp) != {w}:
                    continue
                if _directed_forward(graph, lp):
                    plans.append((0, len(sp) + len(lp), WitnessPlan("case1", w, sp, lp)))
                    continue
                if t == len(sp) - 1 or (lp[1], lp[0]) not in graph.edges:
                    continue
                used = set(sp) | set(lp)
                chains = []
                for i in range(1, len(lp) - 1):
                    if (lp[i - 1], lp[i]) in graph.edges and (lp[i + 1], lp[i]) in graph.edges:
                        chain = _shortest_directed(graph, lp[i], feats - {w}, (used | {yhat, u}) - {lp[i]})
                        if chain is None:
                            break
                        used |= set(chain)
                        chains.append(chain)
                else:
                    size = len(sp) + len(lp) + sum(len(c) for c in chains)
                    plans.append((1, size, WitnessPlan("case2a", w, sp, lp, tuple(chains))))
    plans.sort(key=lambda x: (x[0], x[1], [graph.index(n) for n in x[2].source_path + x[2].label_path]))
    for *_, plan in plans:
        yield plan


def _bern(p1: float) -> ExogenousSpec:
    return ExogenousSpec((0, 1), (1.0 - p1, p1))


def build_witness(graph: SLGraph, plan: WitnessPlan) -> StructuralModel:
    a, y, yhat = graph.sensitive, graph.target, graph.prediction
    sp, lp = plan.source_path, plan.label_path
    w = plan.feature
    point = ExogenousSpec.point()
    domains: dict[str, tuple] = {}
    mech: dict[str, tuple] = {}
    const = (point, lambda pa, e: 0)

    def copy_of(parent):
        return point, lambda pa, e, q=parent: pa[q]

    t = _source_index(graph, sp)
    src = sp[t]
    domains[src] = (0, 1)
    mech[src] = (_bern(0.9), lambda pa, e: e)
    for i in range(t - 1, -1, -1):       # T ⇢ A, copying toward A
        domains[sp[i]] = (0, 1)
        mech[sp[i]] = copy_of(sp[i + 1])
    for i in range(t + 1, len(sp)):      # T ⇢ W
        domains[sp[i]] = (0, 1)
        mech[sp[i]] = copy_of(sp[i - 1])

    if plan.case == "case1":
        for i in range(1, len(lp) - 1):
            domains[lp[i]] = (0, 1)
            mech[lp[i]] = copy_of(lp[i - 1])
        prev = lp[-2]
        domains[y] = (0, 1)
        # cells of mass .49/.02/.49: Y=1 w.p. 0.49 + 0.02 * parent
        mech[y] = (ExogenousSpec((0, 1, 2), (0.49, 0.02, 0.49)),
                   lambda pa, e, q=prev: 1 if e == 0 or (e == 1 and pa[q] == 1) else 0)
        domains[yhat] = (0, 1)
    else:
        # split the label path into sources S^i and colliders C^i
        kinds = {}
        for i in range(1, len(lp)):
            into_prev = (lp[i], lp[i - 1]) in graph.edges
            nxt_into = i + 1 < len(lp) and (lp[i + 1], lp[i]) in graph.edges
            if i == len(lp) - 1:
                kinds[lp[i]] = "source" if into_prev else "end"
            elif into_prev and not nxt_into:
                kinds[lp[i]] = "source"
            elif not into_prev and nxt_into:
                kinds[lp[i]] = "collider"
            else:
                kinds[lp[i]] = "copy_from_prev" if not into_prev else "copy_from_next"
        sources = [n for n in lp[1:] if kinds.get(n) == "source"]
        last_source = sources[-1]
        for i in range(1, len(lp)):
            n = lp[i]
            domains[n] = (-1, 1)
            k = kinds[n]
            if k == "source":
                exo = ExogenousSpec((-1, 1), (0.4, 0.6)) if n == last_source else ExogenousSpec((-1, 1), (0.5, 0.5))
                mech[n] = (exo, lambda pa, e: e)
            elif k == "collider":
                mech[n] = (point, lambda pa, e, p=lp[i - 1], q=lp[i + 1]: pa[p] * pa[q])
            elif k in ("copy_from_prev", "end"):
                mech[n] = copy_of(lp[i - 1])
            else:
                mech[n] = copy_of(lp[i + 1])
        for chain in plan.chains:
            for i in range(1, len(chain)):
                domains[chain[i]] = (-1, 1)
                mech[chain[i]] = copy_of(chain[i - 1])
        domains[w] = (-1, 0, 1)
        mech[w] = (point, lambda pa, e, p=sp[-2], q=lp[1]: pa[p] * pa[q])
        domains[yhat] = (-1, 1)

    for n in graph.nodes:
        if graph.role(n) in (NodeRole.PREDICTION, NodeRole.UTILITY) or n in mech:
            continue
        domains[n] = (0,)
        mech[n] = const
    if a not in sp:
        raise UnsupportedCase("sensitive node is not on the source path")
    groups = GroupSpec(0, 1)
    return StructuralModel.from_callables(graph, domains, mech, LossSpec.zero_one(), groups)


def witness_itv_range(model: StructuralModel) -> tuple[float, float, int]:
    """ITV range over all brute-force optimal policies."""
    try:
        policies = optimal_policies_bruteforce(model, cap=10**5)
    except CapacityError:
        policies = solve(model)
    vals = [itv_from_joint(joint_distribution(model, p), model.groups) for p in policies]
    return min(vals), max(vals), len(vals)


def witness_scm(graph: SLGraph, tol: float = 1e-9) -> StructuralModel:
    """
    Model compatible with ``graph`` in which every optimal zero-one
    predictor introduces total variation.

    Supports the decompositions where the label path is directed (Case 1) or
    starts with an edge into the feature and meets the source path only at
    the feature (Case 2a).  The construction is checked by enumerating every
    optimal policy.
    """
    if not validate_sl_graph(graph).ok:
        raise GraphError("; ".join(validate_sl_graph(graph).violations))
    if not itv_criterion(graph):
        raise GraphError("graph does not satisfy the ITV criterion")
    tried = 0
    for plan in witness_plans(graph):
        tried += 1
        try:
            model = build_witness(graph, plan)
        except (ModelError, UnsupportedCase):
            continue
        lo, _, _ = witness_itv_range(model)
        if lo > tol:
            return model
    raise UnsupportedCase(f"no Case 1 / Case 2a construction found ({tried} candidates tried)")
