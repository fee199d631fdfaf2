"""Tree-structured pairwise Hamiltonian models and their thermal-state oracles.

A model is a tree graph whose edges carry two-site Hermitian terms, together
with an inverse temperature.  The inverse temperature is a model property
rather than a per-call argument, so every object derived from a model records
the temperature it was built at.  Edge terms are stored unembedded (4x4 for a
qubit pair) and embedded lazily.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .operators import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DenseOperator,
    SiteLayout,
    assert_hermitian,
    embed,
    hermitize,
    matrix_exp_h,
    partial_trace,
)


class ModelError(ValueError):
    """Invalid graph-model construction or query."""


@dataclass(frozen=True)
class EdgeContext:
    """What a term factory gets to see about the edge it is building."""

    u: int
    v: int
    dim_u: int
    dim_v: int
    degree_u: int
    degree_v: int


TermFactory = Callable[[EdgeContext], np.ndarray]


@dataclass(frozen=True, eq=False)
class EdgeTerm:
    """An unordered edge (u, v) with its Hermitian interaction term.

    The term lives on the two-site layout of {u, v} in ascending site order.
    """

    u: int
    v: int
    term: DenseOperator

    def __post_init__(self):
        if self.u == self.v:
            raise ModelError(f"self-loop at vertex {self.u}")
        u, v = sorted((self.u, self.v))
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        if self.term.layout.sites != (u, v):
            raise ModelError(
                f"edge term must live on sites {(u, v)}, got {self.term.layout.sites}"
            )
        assert_hermitian(self.term)

    @property
    def key(self) -> tuple[int, int]:
        return (self.u, self.v)

    def endpoints(self) -> frozenset[int]:
        return frozenset((self.u, self.v))


@dataclass(frozen=True, eq=False)
class GraphModel:
    """A tree of sites, one Hermitian term per edge, at fixed temperature."""

    layout: SiteLayout
    edges: tuple[EdgeTerm, ...]
    beta: float

    def __post_init__(self):
        if self.beta <= 0:
            raise ModelError(f"inverse temperature must be positive, got {self.beta}")
        object.__setattr__(self, "edges", tuple(self.edges))
        seen = set()
        for e in self.edges:
            for s in (e.u, e.v):
                if s not in self.layout.sites:
                    raise ModelError(f"edge endpoint {s} is not a model vertex")
                if e.term.layout.dim_of(s) != self.layout.dim_of(s):
                    raise ModelError(f"edge term dimension mismatch at site {s}")
            if e.key in seen:
                raise ModelError(f"duplicate edge {e.key}")
            seen.add(e.key)
        _require_tree(self.layout.sites, [e.key for e in self.edges])

    @property
    def vertices(self) -> tuple[int, ...]:
        return self.layout.sites

    def edge(self, key: tuple[int, int]) -> EdgeTerm:
        u, v = sorted(key)
        for e in self.edges:
            if e.key == (u, v):
                return e
        raise ModelError(f"no edge {key} in model")


def _require_tree(vertices: Sequence[int], edge_keys: Sequence[tuple[int, int]]):
    n = len(vertices)
    if n == 0:
        raise ModelError("model has no vertices")
    if len(edge_keys) != n - 1:
        raise ModelError(
            f"{len(edge_keys)} edges on {n} vertices cannot form a tree "
            "(cyclic or disconnected specification)"
        )
    if n == 1:
        return
    adj: dict[int, list[int]] = {v: [] for v in vertices}
    for u, v in edge_keys:
        adj[u].append(v)
        adj[v].append(u)
    dist = bfs_distances(adj, [vertices[0]])
    dangling = [v for v in vertices if v not in dist]
    if dangling:
        raise ModelError(f"dangling vertices {dangling}: graph is disconnected")


def bfs_distances(
    adj: Mapping[int, Iterable[int]], sources: Iterable[int]
) -> dict[int, int]:
    """Breadth-first distances from a set of source vertices."""
    dist = {s: 0 for s in sources}
    queue = deque(dist)
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def adjacency(model: GraphModel) -> dict[int, tuple[int, ...]]:
    adj: dict[int, list[int]] = {v: [] for v in model.vertices}
    for e in model.edges:
        adj[e.u].append(e.v)
        adj[e.v].append(e.u)
    return {v: tuple(sorted(ws)) for v, ws in adj.items()}


def degrees(model: GraphModel) -> dict[int, int]:
    return {v: len(ws) for v, ws in adjacency(model).items()}


def distance_map(model: GraphModel, targets: Iterable[int]) -> dict[int, int]:
    targets = set(targets)
    if not targets:
        raise ModelError("distance to an empty vertex set is undefined")
    unknown = targets - set(model.vertices)
    if unknown:
        raise ModelError(f"unknown vertices {sorted(unknown)}")
    return bfs_distances(adjacency(model), targets)


def distance(model: GraphModel, v: int, targets: Iterable[int]) -> int:
    """Shortest path length (in edges) from ``v`` to the nearest target."""
    if v not in model.vertices:
        raise ModelError(f"unknown vertex {v}")
    return distance_map(model, targets)[v]


def neighborhood(model: GraphModel, subset: Iterable[int], radius: int) -> frozenset[int]:
    """All vertices within graph distance ``radius`` of the subset."""
    dm = distance_map(model, subset)
    return frozenset(v for v, d in dm.items() if d <= radius)


def diameter(model: GraphModel) -> int:
    verts = model.vertices
    ecc = 0
    for v in verts:
        ecc = max(ecc, max(distance_map(model, [v]).values()))
    return ecc


# -- region partition ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RegionPartition:
    """Edges split by position relative to the radius-``radius`` ball.

    ``inner`` edges have both endpoints within distance ``radius`` of the
    anchor, ``buffer`` edges straddle the boundary of the ball, and ``outer``
    edges lie entirely beyond it.  The three sets are disjoint and exhaust
    the model's edges.
    """

    anchor: frozenset[int]
    radius: int
    inner: tuple[EdgeTerm, ...]
    buffer: tuple[EdgeTerm, ...]
    outer: tuple[EdgeTerm, ...]


def region_partition(
    model: GraphModel, anchor: Iterable[int], radius: int
) -> RegionPartition:
    if radius < 0:
        raise ModelError(f"radius must be non-negative, got {radius}")
    anchor = frozenset(anchor)
    dm = distance_map(model, anchor)
    inner, buf, outer = [], [], []
    for e in model.edges:
        lo, hi = sorted((dm[e.u], dm[e.v]))
        if hi <= radius:
            inner.append(e)
        elif lo > radius:
            outer.append(e)
        else:
            buf.append(e)
    return RegionPartition(anchor, radius, tuple(inner), tuple(buf), tuple(outer))


# -- Hamiltonians and thermal states ------------------------------------------

def edge_hamiltonian(
    model: GraphModel,
    edges: Iterable[EdgeTerm] | None = None,
    layout: SiteLayout | None = None,
) -> DenseOperator:
    """Sum of the given edge terms embedded on ``layout`` (default: full)."""
    layout = layout if layout is not None else model.layout
    edges = model.edges if edges is None else tuple(edges)
    total = np.zeros((layout.dim, layout.dim), dtype=np.complex128)
    for e in edges:
        total = total + embed(e.term, layout).mat
    return DenseOperator(layout, total)


def hamiltonian(model: GraphModel) -> DenseOperator:
    return edge_hamiltonian(model)


def thermal_state(model: GraphModel) -> DenseOperator:
    """exp(-beta H) / Z, computed with a spectral shift for stability."""
    h = hamiltonian(model)
    w = np.linalg.eigvalsh(h.mat)
    shifted = matrix_exp_h(-model.beta * (h - float(w[0]) * DenseOperator.identity(h.layout)))
    z = shifted.trace().real
    return DenseOperator(h.layout, shifted.mat / z)


def partition_function(model: GraphModel) -> float:
    w = np.linalg.eigvalsh(hamiltonian(model).mat)
    return float(np.exp(-model.beta * w).sum())


def exact_reduced_density(model: GraphModel, keep: Iterable[int]) -> DenseOperator:
    """Brute-force reduced thermal state: the oracle all beliefs are judged by."""
    keep = set(keep)
    if not keep:
        raise ModelError("must keep at least one vertex")
    unknown = keep - set(model.vertices)
    if unknown:
        raise ModelError(f"unknown vertices {sorted(unknown)}")
    rho = thermal_state(model)
    return partial_trace(rho, set(model.vertices) - keep)


# -- stock term factories ------------------------------------------------------

def _require_qubits(ctx: EdgeContext, name: str):
    if ctx.dim_u != 2 or ctx.dim_v != 2:
        raise ModelError(f"{name} factory requires qubit sites")


def classical_ising(J: float = 1.0) -> TermFactory:
    """Diagonal Ising coupling -J Z(x)Z; every term commutes with every other."""

    def make(ctx: EdgeContext) -> np.ndarray:
        _require_qubits(ctx, "classical_ising")
        return -J * np.kron(PAULI_Z, PAULI_Z)

    return make


def transverse_ising(
    J: float = 1.0, hx: float = 1.0, full_boundary_fields: bool = False
) -> TermFactory:
    """Transverse-field Ising edge term -J Z(x)Z - (hx/2)(X(x)I + I(x)X).

    The field is split evenly over a site's incident edges, so interior chain
    sites see the full ``hx`` while boundary sites get half weight.  With
    ``full_boundary_fields`` the missing half is added back on degree-1
    endpoints.
    """

    def make(ctx: EdgeContext) -> np.ndarray:
        _require_qubits(ctx, "transverse_ising")
        eye = np.eye(2, dtype=np.complex128)
        term = -J * np.kron(PAULI_Z, PAULI_Z)
        term = term - (hx / 2.0) * (np.kron(PAULI_X, eye) + np.kron(eye, PAULI_X))
        if full_boundary_fields:
            if ctx.degree_u == 1:
                term = term - (hx / 2.0) * np.kron(PAULI_X, eye)
            if ctx.degree_v == 1:
                term = term - (hx / 2.0) * np.kron(eye, PAULI_X)
        return term

    return make


def heisenberg(J: float = 1.0) -> TermFactory:
    """Isotropic exchange J (XX + YY + ZZ)."""

    def make(ctx: EdgeContext) -> np.ndarray:
        _require_qubits(ctx, "heisenberg")
        return J * (
            np.kron(PAULI_X, PAULI_X)
            + np.kron(PAULI_Y, PAULI_Y)
            + np.kron(PAULI_Z, PAULI_Z)
        )

    return make


def random_two_local(seed: int = 0, scale: float = 1.0) -> TermFactory:
    """Seeded random Hermitian term, normalized to operator norm ``scale``.

    Each edge draws from an independent stream keyed by (seed, u, v), so
    the model is reproducible and insensitive to edge construction order.
    """

    def make(ctx: EdgeContext) -> np.ndarray:
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(ctx.u, ctx.v))
        rng = np.random.default_rng(ss)
        d = ctx.dim_u * ctx.dim_v
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        h = hermitize(g)
        return scale * h / np.linalg.norm(h, 2)

    return make


STOCK_FACTORIES: dict[str, Callable[..., TermFactory]] = {
    "classical_ising": classical_ising,
    "tfim": transverse_ising,
    "heisenberg": heisenberg,
    "random2": random_two_local,
}


def stock_factory(name: str, **params) -> TermFactory:
    if name not in STOCK_FACTORIES:
        raise ModelError(f"unknown factory {name!r}; have {sorted(STOCK_FACTORIES)}")
    return STOCK_FACTORIES[name](**params)


# -- builders ------------------------------------------------------------------

def build_tree(
    dims: Mapping[int, int],
    edge_specs: Sequence[tuple[int, int, TermFactory | np.ndarray]],
    beta: float,
) -> GraphModel:
    """Build a model from vertex dimensions and per-edge factories/matrices."""
    vertices = tuple(sorted(dims))
    layout = SiteLayout(vertices, tuple(dims[v] for v in vertices))
    degree: dict[int, int] = {v: 0 for v in vertices}
    for u, v, _ in edge_specs:
        for s in (u, v):
            if s not in degree:
                raise ModelError(f"edge endpoint {s} has no declared dimension")
        degree[u] += 1
        degree[v] += 1
    edges = []
    for u, v, spec in edge_specs:
        u, v = sorted((u, v))
        ctx = EdgeContext(u, v, dims[u], dims[v], degree[u], degree[v])
        mat = spec(ctx) if callable(spec) else np.asarray(spec, dtype=np.complex128)
        term = DenseOperator(layout.subset((u, v)), mat)
        edges.append(EdgeTerm(u, v, term))
    return GraphModel(layout, tuple(edges), beta)


def build_chain(
    n: int, local_dim: int = 2, factory: TermFactory | None = None, beta: float = 1.0
) -> GraphModel:
    """Chain on vertices 1..n with edges (k, k+1)."""
    if n < 2:
        raise ModelError(f"a chain needs at least 2 vertices, got {n}")
    factory = factory if factory is not None else classical_ising()
    dims = {k: local_dim for k in range(1, n + 1)}
    specs = [(k, k + 1, factory) for k in range(1, n)]
    return build_tree(dims, specs, beta)


# -- JSON model files ----------------------------------------------------------

def matrix_from_json(rows) -> np.ndarray:
    """Nested [re, im] pairs, row-major, to a complex matrix."""
    return np.array(
        [[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128
    )


def matrix_to_json(mat: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(mat)]


def model_from_config(cfg: Mapping) -> GraphModel:
    """Build a model from the JSON config structure.

    Expected shape::

        {"vertices": [{"id": 1, "dim": 2}, ...],
         "edges": [{"u": 1, "v": 2, "term": {"factory": "tfim", "params": {...}}},
                   {"u": 2, "v": 3, "term": {"matrix": [[[re, im], ...], ...]}}],
         "beta": 1.0}
    """
    try:
        dims = {int(v["id"]): int(v["dim"]) for v in cfg["vertices"]}
        beta = float(cfg["beta"])
        specs = []
        for e in cfg["edges"]:
            term = e["term"]
            if "matrix" in term:
                spec: TermFactory | np.ndarray = matrix_from_json(term["matrix"])
            else:
                spec = stock_factory(term["factory"], **term.get("params", {}))
            specs.append((int(e["u"]), int(e["v"]), spec))
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model config: {exc}") from exc
    return build_tree(dims, specs, beta)


def load_model(path: str | Path) -> GraphModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_config(json.load(fh))
