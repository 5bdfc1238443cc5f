"""Markov systems on box-partitioned state spaces: validation, graph
diagnostics, contraction estimation, and trajectory/measure simulation.

A system is a finite directed multigraph whose vertices carry disjoint box
regions of R^n and whose edges carry affine maps with constant selection
probabilities. Restricting maps to affine and probabilities to constants
keeps every check here exact at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import DataError, DomainError
from .numerics import SeededRng, categorical


@dataclass(frozen=True)
class Box:
    """Axis-aligned box region [lo_1,hi_1] x ... x [lo_n,hi_n]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise DomainError(f"invalid box bounds lo={lo}, hi={hi}")

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, x, atol: float = 1e-12) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x >= self.lo - atol) and np.all(x <= self.hi + atol))

    def corners(self):
        for signs in product(*[(0, 1)] * self.dim):
            yield np.where(np.array(signs, dtype=bool), self.hi, self.lo)


@dataclass(frozen=True)
class AffineMap:
    """x -> A x + b."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if A.shape[0] != b.size:
            raise DomainError(f"affine map shape mismatch A{A.shape} b{b.shape}")

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.A @ x + self.b

    def lipschitz(self) -> float:
        """Exact Lipschitz constant in the Euclidean metric (spectral norm)."""
        return float(np.linalg.norm(self.A, 2))


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    prob: float
    map: AffineMap


@dataclass(frozen=True)
class MarkovSystemSpec:
    """Vertices with box regions plus probabilistic affine edges."""

    regions: tuple[Box, ...]
    edges: tuple[Edge, ...]

    @property
    def vertex_count(self) -> int:
        return len(self.regions)

    def out_edges(self, v: int) -> list[Edge]:
        return [e for e in self.edges if e.src == v]

    def region_of(self, x) -> int:
        """Index of the region containing x, or raise."""
        for i, r in enumerate(self.regions):
            if r.contains(x):
                return i
        raise DomainError(f"state {x} lies in no region")


@dataclass
class Trajectory:
    states: list[np.ndarray]
    cesaro: list[float]


@dataclass(frozen=True)
class ErgodicityReport:
    strongly_connected: bool
    primitive: bool
    primitivity_exponent: int | None
    contraction_estimate: float
    verdict: str  # unique-ergodic-sufficient | invariant-exists-sufficient | inconclusive

    def __post_init__(self):
        if self.primitive and not self.strongly_connected:
            raise DataError("primitive system must be strongly connected")


def validate(spec: MarkovSystemSpec) -> list[str]:
    """Check definitional invariants; returns a list of violations (empty = ok)."""
    violations = []
    n = spec.vertex_count
    for e in spec.edges:
        if not (0 <= e.src < n and 0 <= e.dst < n):
            violations.append(f"edge {e.src}->{e.dst}: vertex out of range")
            continue
        if e.prob < 0:
            violations.append(f"edge {e.src}->{e.dst}: negative probability {e.prob}")
    for v in range(n):
        outs = spec.out_edges(v)
        total = sum(e.prob for e in outs)
        if abs(total - 1.0) > 1e-9:
            violations.append(f"vertex {v}: outgoing probabilities sum to {total}, not 1")
    # containment: affine image of a box is determined by its corners
    for e in spec.edges:
        if not (0 <= e.src < n and 0 <= e.dst < n):
            continue
        dst = spec.regions[e.dst]
        for c in spec.regions[e.src].corners():
            img = e.map(c)
            if not dst.contains(img, atol=1e-9):
                violations.append(
                    f"edge {e.src}->{e.dst}: corner {c.tolist()} maps to "
                    f"{img.tolist()} outside terminal region"
                )
                break
    return violations


def _adjacency(spec: MarkovSystemSpec) -> np.ndarray:
    n = spec.vertex_count
    adj = np.zeros((n, n), dtype=bool)
    for e in spec.edges:
        if e.prob > 0:
            adj[e.src, e.dst] = True
    return adj


def strongly_connected(spec: MarkovSystemSpec) -> bool:
    """True iff every vertex reaches every vertex along directed edges."""
    adj = _adjacency(spec)
    n = adj.shape[0]

    def reachable(a):
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            v = stack.pop()
            for u in np.flatnonzero(a[v]):
                if not seen[u]:
                    seen[u] = True
                    stack.append(int(u))
        return seen

    return bool(reachable(adj).all() and reachable(adj.T).all())


def is_primitive(spec: MarkovSystemSpec) -> tuple[bool, int | None]:
    """Primitivity by boolean matrix powers up to the Wielandt bound (N-1)^2+1."""
    adj = _adjacency(spec)
    n = adj.shape[0]
    bound = (n - 1) ** 2 + 1
    power = adj.copy()
    for m in range(1, bound + 1):
        if power.all():
            return True, m
        power = power @ adj
    return False, None


def average_contraction(spec: MarkovSystemSpec, pair_samples: int = 256,
                        rng: SeededRng | None = None) -> float:
    """Contraction factor: sup over same-region pairs of the expected
    one-step distance ratio sum_e p_e d(w_e x, w_e y) / d(x, y).

    For affine maps the ratio depends only on the direction of x - y, so we
    take the max over sampled unit directions; in one dimension there is a
    single direction and the value is exact.
    """
    rng = rng or SeededRng(0)
    worst = 0.0
    for v in range(spec.vertex_count):
        outs = spec.out_edges(v)
        if not outs:
            continue
        dim = spec.regions[v].dim
        if dim == 1:
            dirs = [np.array([1.0])]
        else:
            raw = np.asarray(rng.uniform(pair_samples * dim)).reshape(pair_samples, dim)
            raw = 2.0 * raw - 1.0
            norms = np.linalg.norm(raw, axis=1)
            dirs = [r / n for r, n in zip(raw, norms) if n > 1e-12]
        for u in dirs:
            ratio = sum(e.prob * float(np.linalg.norm(e.map.A @ u)) for e in outs)
            worst = max(worst, ratio)
    return worst


def ergodicity_report(spec: MarkovSystemSpec, pair_samples: int = 256,
                      rng: SeededRng | None = None) -> ErgodicityReport:
    """Bundle the sufficient-condition checks into one report."""
    sc = strongly_connected(spec)
    prim, expo = is_primitive(spec)
    a = average_contraction(spec, pair_samples, rng)
    if prim and a < 1.0:
        verdict = "unique-ergodic-sufficient"
    elif sc:
        verdict = "invariant-exists-sufficient"
    else:
        verdict = "inconclusive"
    return ErgodicityReport(sc, prim, expo, a, verdict)


def _edge_tables(spec: MarkovSystemSpec):
    """Per-vertex (edges, cumulative probabilities) for fast edge draws."""
    tables = []
    for v in range(spec.vertex_count):
        outs = spec.out_edges(v)
        cum = np.cumsum([e.prob for e in outs]) if outs else np.array([])
        if outs:
            cum[-1] = 1.0
        tables.append((outs, cum))
    return tables


def _draw_edge(tables, v: int, rng: SeededRng) -> Edge:
    outs, cum = tables[v]
    if not outs:
        raise DomainError(f"vertex {v} has no outgoing edges")
    u = rng.uniform()
    return outs[int(np.searchsorted(cum, u, side="right"))]


def simulate(spec: MarkovSystemSpec, x0, steps: int, observable: int = 0,
             rng: SeededRng | None = None) -> Trajectory:
    """Run one trajectory, recording states and the running mean of one
    state coordinate."""
    rng = rng or SeededRng(0)
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    v = spec.region_of(x)
    tables = _edge_tables(spec)
    # pre-drawn uniforms keep the hot loop free of per-step generator calls
    uniforms = np.asarray(rng.uniform(steps))
    states = [x]
    total = float(x[observable])
    cesaro = [total]
    for k in range(1, steps + 1):
        outs, cum = tables[v]
        if not outs:
            raise DomainError(f"vertex {v} has no outgoing edges")
        e = outs[int(np.searchsorted(cum, uniforms[k - 1], side="right"))]
        x = e.map(x)
        v = e.dst
        states.append(x)
        total += float(x[observable])
        cesaro.append(total / (k + 1))
    return Trajectory(states=states, cesaro=cesaro)


def push_forward(particles, spec: MarkovSystemSpec, rng: SeededRng) -> list[np.ndarray]:
    """Advance every particle one step; particle count is preserved."""
    tables = _edge_tables(spec)
    out = []
    for p in particles:
        x = np.atleast_1d(np.asarray(p, dtype=float))
        v = spec.region_of(x)
        e = _draw_edge(tables, v, rng)
        out.append(e.map(x))
    assert len(out) == len(list(particles))
    return out


def coupling_probe(spec: MarkovSystemSpec, x0, x0p, steps: int,
                   rng: SeededRng | None = None) -> list[float]:
    """Distances along two trajectories driven by identical edge draws.

    A heuristic contraction probe, not a certificate: the coupling is
    synchronous (common randomness) and both starts must share a region.
    """
    rng = rng or SeededRng(0)
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    xp = np.atleast_1d(np.asarray(x0p, dtype=float))
    v = spec.region_of(x)
    if spec.region_of(xp) != v:
        raise DomainError("coupling probe requires both starts in the same region")
    tables = _edge_tables(spec)
    dists = [float(np.linalg.norm(x - xp))]
    for _ in range(steps):
        e = _draw_edge(tables, v, rng)
        x, xp, v = e.map(x), e.map(xp), e.dst
        dists.append(float(np.linalg.norm(x - xp)))
    return dists


def parse_spec_file(path) -> MarkovSystemSpec:
    """Parse the line-oriented Markov-system format.

    Records: ``VERTEX <id> <dim>``, ``REGION <vertex-id> <lo_1> <hi_1> ...``,
    ``EDGE <src> <dst> <prob> A <row-major entries> B <offset entries>``.
    Blank lines and ``#`` comments are ignored. Validation is a separate
    explicit step (see :func:`validate`).
    """
    dims: dict[int, int] = {}
    regions: dict[int, Box] = {}
    edges: list[Edge] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            kind = tokens[0].upper()
            try:
                if kind == "VERTEX":
                    vid, dim = int(tokens[1]), int(tokens[2])
                    dims[vid] = dim
                elif kind == "REGION":
                    vid = int(tokens[1])
                    vals = [float(t) for t in tokens[2:]]
                    if vid not in dims:
                        raise ValueError(f"REGION before VERTEX {vid}")
                    n = dims[vid]
                    if len(vals) != 2 * n:
                        raise ValueError(f"expected {2 * n} bounds, got {len(vals)}")
                    regions[vid] = Box(lo=np.array(vals[0::2]), hi=np.array(vals[1::2]))
                elif kind == "EDGE":
                    src, dst, prob = int(tokens[1]), int(tokens[2]), float(tokens[3])
                    if src not in dims or dst not in dims:
                        raise ValueError("EDGE references undeclared vertex")
                    n_src, n_dst = dims[src], dims[dst]
                    a_pos = tokens.index("A")
                    b_pos = tokens.index("B")
                    a_vals = [float(t) for t in tokens[a_pos + 1:b_pos]]
                    b_vals = [float(t) for t in tokens[b_pos + 1:]]
                    if len(a_vals) != n_dst * n_src or len(b_vals) != n_dst:
                        raise ValueError("EDGE matrix/offset arity mismatch")
                    A = np.array(a_vals).reshape(n_dst, n_src)
                    edges.append(Edge(src, dst, prob, AffineMap(A=A, b=np.array(b_vals))))
                else:
                    raise ValueError(f"unknown record '{tokens[0]}'")
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not dims:
        raise DataError(f"{path}: no VERTEX records")
    ordered = sorted(dims)
    if ordered != list(range(len(ordered))):
        raise DataError(f"{path}: vertex ids must be 0..N-1, got {ordered}")
    missing = [v for v in ordered if v not in regions]
    if missing:
        raise DataError(f"{path}: vertices without REGION: {missing}")
    return MarkovSystemSpec(
        regions=tuple(regions[v] for v in ordered),
        edges=tuple(edges),
    )
