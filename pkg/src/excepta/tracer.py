"""Locate exceptional points, trace exceptional lines, assemble chains.

The zero set of the PF discriminant is a family of curves (exceptional
lines).  On a symmetry plane the discriminant is real there, so the
in-plane zero set is a codimension-1 curve reached by a pseudo-inverse
Newton iteration; off the planes both real components vanish only on the
lines themselves.  Chain points are junctions where lines from different
planes touch; they are found by proximity of traced polylines and refined
along the high-symmetry intersection line.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import topology as topo
from .qep import SpectralGapError, evaluate, pf_bands, solve
from .topology import circle_path, discriminant_number

VERTEX_TOL = 1e-8


class DiabolicPointError(RuntimeError):
    """Degeneracy with orthogonal eigenvectors: not exceptional."""


class RefineError(RuntimeError):
    """Newton + fallback failed to reach the discriminant zero set."""

    def __init__(self, message, point=None, value=None):
        super().__init__(message)
        self.point = point
        self.value = value


@dataclass(frozen=True)
class PlaneSpec:
    """Affine 2-plane origin + a*u + b*v with a label for bookkeeping."""

    origin: np.ndarray
    u: np.ndarray
    v: np.ndarray
    tag: str = "free"

    def __post_init__(self):
        for name in ("origin", "u", "v"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    def point(self, a: float, b: float) -> np.ndarray:
        return self.origin + a * self.u + b * self.v

    def coords(self, point) -> np.ndarray:
        rel = np.asarray(point, dtype=float) - self.origin
        basis = np.stack([self.u, self.v], axis=1)
        sol, *_ = np.linalg.lstsq(basis, rel, rcond=None)
        return sol


def plane_gamma0() -> PlaneSpec:
    return PlaneSpec(origin=np.zeros(3), u=np.array([0.0, 1.0, 0.0]), v=np.array([0.0, 0.0, 1.0]), tag="gamma=0")


def plane_kappa0() -> PlaneSpec:
    return PlaneSpec(origin=np.zeros(3), u=np.array([1.0, 0.0, 0.0]), v=np.array([0.0, 1.0, 0.0]), tag="kappa=0")


def plane_oblique(gamma0: float, m0: float = 1.0) -> PlaneSpec:
    """Plane kappa = gamma0 gamma / (2 m0) spanned by chi and the tilted axis."""
    slope = gamma0 / (2.0 * m0)
    u = np.array([1.0, 0.0, slope])
    return PlaneSpec(origin=np.zeros(3), u=u / np.linalg.norm(u), v=np.array([0.0, 1.0, 0.0]), tag="kappa=g0*gamma/2m0")


def plane_wavevector(axis: str, value: float = 0.0) -> PlaneSpec:
    """Constant-k_i plane of the Brillouin zone, e.g. plane_wavevector('x')."""
    axes = {"x": 0, "y": 1, "z": 2}
    if axis not in axes:
        raise ValueError("axis must be one of 'x', 'y', 'z'")
    i = axes[axis]
    origin = np.zeros(3)
    origin[i] = value
    u = np.zeros(3)
    v = np.zeros(3)
    u[(i + 1) % 3] = 1.0
    v[(i + 2) % 3] = 1.0
    return PlaneSpec(origin=origin, u=u, v=v, tag=f"k{axis}={value:g}")


def pf_delta(build, point) -> complex:
    """PF discriminant at one parameter point."""
    return topo.pf_discriminant(solve(build(np.asarray(point, dtype=float))))


@dataclass(frozen=True)
class CandidateCell:
    index: tuple[int, int]
    center: np.ndarray
    min_delta: float
    min_separation: float


def scan_plane(build, plane: PlaneSpec, grid: tuple[int, int], window) -> list[CandidateCell]:
    """Grid search for EP-bearing cells on a plane window.

    A cell is a candidate when the PF band separation at some corner drops
    below 5% of the window's median, when it holds a local minimum of
    |discriminant| below 1e-3 of the median, or when the real part of the
    discriminant changes sign across its corners while staying small (on a
    symmetry plane the discriminant is real, so that pins a zero crossing
    at any grid resolution).  Far from all lines nothing is flagged.
    """
    n1, n2 = grid
    if n1 < 16 or n2 < 16:
        raise ValueError("scan grid must be at least 16 x 16")
    (a0, a1), (b0, b1) = window
    avals = np.linspace(a0, a1, n1 + 1)
    bvals = np.linspace(b0, b1, n2 + 1)
    sep = np.full((n1 + 1, n2 + 1), np.inf)
    delta = np.full((n1 + 1, n2 + 1), np.inf)
    re_delta = np.full((n1 + 1, n2 + 1), np.nan)
    for i, a in enumerate(avals):
        for j, b in enumerate(bvals):
            spectrum = solve(build(plane.point(a, b)))
            if not spectrum.pf_gap_ok:
                continue  # gapless node: no PF statistics there
            w = np.array([p.omega for p in pf_bands(spectrum)])
            d = np.abs(w[:, None] - w[None, :])
            np.fill_diagonal(d, np.inf)
            sep[i, j] = d.min()
            disc = topo.pf_discriminant(spectrum)
            delta[i, j] = abs(disc)
            re_delta[i, j] = disc.real
    finite = np.isfinite(sep)
    if not np.any(finite):
        return []
    sep_thresh = 0.05 * np.median(sep[finite])
    delta_med = np.median(delta[finite])
    delta_small = 0.5 * delta_med

    local_min = np.ones_like(delta, dtype=bool)
    for shift_ax, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        rolled = np.roll(delta, shift, axis=shift_ax)
        if shift == 1:
            rolled[(0,) if shift_ax == 0 else (slice(None), 0)] = np.inf
        else:
            rolled[(-1,) if shift_ax == 0 else (slice(None), -1)] = np.inf
        local_min &= delta <= rolled
    hot = (sep < sep_thresh) | (local_min & (delta < 1e-3 * delta_med))

    cells = []
    for i in range(n1):
        for j in range(n2):
            corner_hot = hot[i : i + 2, j : j + 2]
            block = delta[i : i + 2, j : j + 2]
            # On a symmetry plane the discriminant is real, so a corner sign
            # change pins a zero crossing inside the cell regardless of how
            # coarse the grid is.  The smallness filter keeps distant phase
            # boundaries of other band pairs from triggering.
            signs = np.sign(re_delta[i : i + 2, j : j + 2])
            sign_change = np.isfinite(block).all() and signs.max() > 0 > signs.min()
            if np.any(corner_hot) or (sign_change and block.min() < delta_small):
                cells.append(
                    CandidateCell(
                        index=(i, j),
                        center=plane.point(
                            0.5 * (avals[i] + avals[i + 1]), 0.5 * (bvals[j] + bvals[j + 1])
                        ),
                        min_delta=float(block.min()),
                        min_separation=float(sep[i : i + 2, j : j + 2].min()),
                    )
                )
    return cells


def _fd_jacobian(f, x, h_rel=1e-6):
    x = np.asarray(x, dtype=float)
    f0 = f(x)
    jac = np.zeros((len(f0), len(x)))
    for k in range(len(x)):
        h = h_rel * (1.0 + abs(x[k]))
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        jac[:, k] = (f(xp) - f(xm)) / (2.0 * h)
    return f0, jac


def refine_ep(
    build,
    seed,
    plane: PlaneSpec | None = None,
    delta_tol: float = 1e-12,
    step_tol: float = 1e-10,
    max_iter: int = 60,
    check_coalescence: bool = True,
) -> np.ndarray:
    """Damped Newton root-solve of (Re D+, Im D+) = 0 from a candidate seed.

    In-plane the second component vanishes identically, so the pseudo-inverse
    step lands on the nearest point of the zero curve.  Stagnating Newton
    falls back to steepest descent of |D+|^2.  The converged point must show
    eigenvector coalescence, which separates exceptional from diabolic
    degeneracies.
    """
    seed = np.asarray(seed, dtype=float)
    if plane is not None:
        x = plane.coords(seed)
        to_point = lambda x: plane.point(x[0], x[1])
    else:
        x = seed.copy()
        to_point = lambda x: x

    def f(x):
        try:
            d = pf_delta(build, to_point(x))
        except SpectralGapError as exc:
            raise RefineError(f"left the line-gapped region near {to_point(x)}") from exc
        return np.array([d.real, d.imag])

    def size(x):
        try:
            return float(np.linalg.norm(f(x)))
        except RefineError:
            return np.inf

    current = size(x)
    if not np.isfinite(current):
        raise RefineError("seed lies outside the line-gapped region", point=seed)
    for _ in range(max_iter):
        if current < delta_tol:
            break
        f0, jac = _fd_jacobian(f, x)
        step = -np.linalg.pinv(jac, rcond=1e-10) @ f0
        accepted = False
        for damp in (1.0, 0.5, 0.25, 0.125, 1 / 16, 1 / 32, 1 / 64):
            trial = x + damp * step
            trial_size = size(trial)
            if trial_size < current:
                x, current = trial, trial_size
                accepted = True
                break
        if not accepted:
            # Steepest descent of |D|^2 along -J^T f, bisected.
            direction = -jac.T @ f0
            norm = np.linalg.norm(direction)
            if norm == 0:
                break
            direction /= norm
            scale = np.linalg.norm(step) or step_tol
            for damp in (1.0, 0.5, 0.25, 0.125, 1 / 16, 1 / 32):
                trial = x + damp * scale * direction
                trial_size = size(trial)
                if trial_size < current:
                    x, current = trial, trial_size
                    accepted = True
                    break
            if not accepted:
                break
    if current >= delta_tol:
        raise RefineError(
            f"EP refinement stalled at |D+| = {current:.3e}", point=to_point(x), value=current
        )
    point = to_point(x)
    if check_coalescence and not _is_coalescent(build, point):
        raise DiabolicPointError(
            f"degeneracy at {point} has a full nullspace (orthogonal eigenvectors): not exceptional"
        )
    return np.asarray(point, dtype=float)


def _is_coalescent(build, point) -> bool:
    """Exceptional vs diabolic discrimination at a refined degeneracy.

    At the cluster-center frequency, Q splits into a defect part plus a term
    of order splitting * dQ/dw.  A diabolic point has no defect (the second
    smallest singular value scales with the splitting); an exceptional one
    keeps a finite defect there.
    """
    q = build(np.asarray(point, dtype=float))
    spectrum = solve(q)
    pf = pf_bands(spectrum)
    pair = min(
        ((i, j) for i in range(len(pf)) for j in range(i + 1, len(pf))),
        key=lambda ij: abs(pf[ij[0]].omega - pf[ij[1]].omega),
    )
    wa, wb = pf[pair[0]].omega, pf[pair[1]].omega
    center = 0.5 * (wa + wb)
    splitting = abs(wa - wb)
    qc = evaluate(q, center)
    dq_norm = np.linalg.norm(2.0 * center * q.mass + 1j * q.damping, 2)
    sigmas = np.linalg.svd(qc, compute_uv=False)
    defect = sigmas[-2] if len(sigmas) >= 2 else sigmas[-1]
    return bool(defect > 10.0 * splitting * max(dq_norm, 1e-30))


@dataclass(frozen=True)
class ExceptionalLine:
    """Oriented polyline of order-2 exceptional points."""

    polyline: np.ndarray
    closed: bool
    plane_tag: str
    orientation: int = 0

    def __post_init__(self):
        object.__setattr__(self, "polyline", np.atleast_2d(np.asarray(self.polyline, dtype=float)))

    @property
    def midpoint_index(self) -> int:
        return len(self.polyline) // 2

    def tangent_at(self, idx: int) -> np.ndarray:
        pts = self.polyline
        lo = max(0, idx - 1)
        hi = min(len(pts) - 1, idx + 1)
        t = pts[hi] - pts[lo]
        return t / np.linalg.norm(t)


def _tangent_from_jacobian(build, point, plane):
    if plane is not None:
        x = plane.coords(point)
        to_point = lambda x: plane.point(x[0], x[1])
    else:
        x = np.asarray(point, dtype=float)
        to_point = lambda x: x

    def f(x):
        d = pf_delta(build, to_point(x))
        return np.array([d.real, d.imag])

    _, jac = _fd_jacobian(f, x)
    _, _, vh = np.linalg.svd(jac)
    local = vh[-1]
    if plane is not None:
        t = local[0] * plane.u + local[1] * plane.v
    else:
        t = local
    return t / np.linalg.norm(t)


def probe_orientation(build, point, tangent, radius: float, n: int = 64) -> int:
    """Right-hand-rule orientation of the line through `point` along `tangent`.

    A counterclockwise probe loop about the tangent carries PFDN +1 when
    the directed line follows the tangent, -1 when it opposes it.
    """
    loop = circle_path(point, tangent, radius, n)
    val = discriminant_number(build, loop, which="pf")
    rounded = int(round(val))
    if rounded not in (-1, 1) or abs(val - rounded) > topo.QUANTIZATION_TOL:
        raise RefineError(f"probe loop PFDN {val} does not identify a single line")
    return rounded


def _in_window(point, window) -> bool:
    lo, hi = window
    p = np.asarray(point, dtype=float)
    return bool(np.all(p >= np.asarray(lo) - 1e-12) and np.all(p <= np.asarray(hi) + 1e-12))


def _segment_point_distance(a, b, p) -> float:
    ab = b - a
    denom = float(np.dot(ab, ab))
    t = 0.0 if denom == 0 else float(np.clip(np.dot(p - a, ab) / denom, 0.0, 1.0))
    return float(np.linalg.norm(a + t * ab - p))


def trace_el(
    build,
    start,
    step: float,
    window,
    plane: PlaneSpec | None = None,
    max_steps: int = 4000,
    orient: bool = True,
) -> ExceptionalLine:
    """Predictor-corrector continuation of an exceptional line.

    Stops on loop closure (a new segment passing the start point) or when
    leaving the axis-aligned `window` (lo, hi).  Open traces run both
    directions from the start and are concatenated.  Every vertex is
    corrector-refined to |D+| < VERTEX_TOL.
    """
    start = refine_ep(build, start, plane=plane, check_coalescence=False)

    def march(direction_sign):
        pts = [start]
        # Jacobian tangent to launch, secant tangents while marching; the
        # corrector keeps the polyline on the zero set either way.
        tangent = _tangent_from_jacobian(build, start, plane) * direction_sign
        for _ in range(max_steps):
            current = pts[-1]
            local_step = step
            for _ in range(7):
                predictor = current + local_step * tangent
                try:
                    corrected = refine_ep(
                        build, predictor, plane=plane, delta_tol=VERTEX_TOL * 1e-2,
                        check_coalescence=False,
                    )
                    if np.linalg.norm(corrected - current) > 1e-3 * step:
                        break
                except RefineError:
                    pass
                local_step *= 0.5
            else:
                return pts, False
            if not _in_window(corrected, window):
                return pts, False
            new_tangent = corrected - current
            new_tangent = new_tangent / np.linalg.norm(new_tangent)
            if np.dot(new_tangent, tangent) < 0:
                new_tangent = -new_tangent
            closing = len(pts) > 8 and _segment_point_distance(current, corrected, start) < 0.6 * step
            pts.append(corrected)
            tangent = new_tangent
            if closing:
                return pts, True
        return pts, False

    forward, closed = march(+1.0)
    if closed:
        polyline = np.array(forward[:-1]) if np.linalg.norm(forward[-1] - start) < 0.5 * step else np.array(forward)
        line = ExceptionalLine(polyline=polyline, closed=True, plane_tag=plane.tag if plane else "free")
    else:
        backward, _ = march(-1.0)
        polyline = np.array(backward[::-1] + forward[1:])
        line = ExceptionalLine(polyline=polyline, closed=False, plane_tag=plane.tag if plane else "free")
    if orient:
        idx = line.midpoint_index
        sign = probe_orientation(build, line.polyline[idx], line.tangent_at(idx), radius=3.0 * step)
        line = ExceptionalLine(
            polyline=line.polyline, closed=line.closed, plane_tag=line.plane_tag, orientation=sign
        )
    return line


@dataclass(frozen=True)
class ChainNode:
    position: np.ndarray
    n_in: int
    n_out: int

    @property
    def balanced(self) -> bool:
        return self.n_in == self.n_out


@dataclass(frozen=True)
class GraphEdge:
    line: ExceptionalLine
    start_node: int | None
    end_node: int | None


@dataclass(frozen=True)
class ChainGraph:
    nodes: tuple[ChainNode, ...]
    edges: tuple[GraphEdge, ...]
    valid: bool
    unbalanced: tuple[int, ...] = ()


def _closest_approach(a: np.ndarray, b: np.ndarray):
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    i, j = np.unravel_index(np.argmin(d), d.shape)
    return d[i, j], i, j


def _newton_on_line(build, origin, direction, t0, tol=1e-12):
    """1D Newton for the real discriminant zero along the symmetry line."""
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    origin = np.asarray(origin, dtype=float)
    t = float(t0)
    for _ in range(60):
        val = pf_delta(build, origin + t * direction).real
        h = 1e-7 * (1.0 + abs(t))
        dval = (
            pf_delta(build, origin + (t + h) * direction).real
            - pf_delta(build, origin + (t - h) * direction).real
        ) / (2.0 * h)
        if dval == 0:
            break
        step = -val / dval
        t += step
        if abs(step) < tol * (1.0 + abs(t)):
            break
    return origin + t * direction


def _split_polyline(line: ExceptionalLine, hits: list[tuple[int, np.ndarray]]) -> list[tuple[np.ndarray, int | None, int | None]]:
    """Cut a polyline at (vertex index, node id) hits; returns (pts, start_node, end_node)."""
    pts = line.polyline
    if not hits:
        return [(pts, None, None)]
    hits = sorted(hits, key=lambda h: h[0])
    pieces = []
    if line.closed:
        order = [h[0] for h in hits]
        ids = [h[1] for h in hits]
        for a in range(len(hits)):
            b = (a + 1) % len(hits)
            ia, ib = order[a], order[b]
            if b == 0:
                seg = np.vstack([pts[ia:], pts[: ib + 1]])
            else:
                seg = pts[ia : ib + 1]
            pieces.append((seg, ids[a], ids[b]))
    else:
        prev_idx, prev_node = 0, None
        for idx, node in hits:
            seg = pts[prev_idx : idx + 1]
            if len(seg) >= 2:
                pieces.append((seg, prev_node, node))
            prev_idx, prev_node = idx, node
        tail = pts[prev_idx:]
        if len(tail) >= 2:
            pieces.append((tail, prev_node, None))
    return pieces


def assemble_chain(
    build,
    edges: list[ExceptionalLine],
    junction_tol: float,
    refine_line: tuple | None = None,
    probe_radius: float | None = None,
) -> ChainGraph:
    """Merge traced lines into a junction graph with flux bookkeeping.

    Junction nodes come from closest approaches (and endpoint collisions)
    between distinct lines within `junction_tol`; optionally each node is
    re-refined along a given high-symmetry line (origin, direction).  Edges
    are split at the nodes, re-oriented by midpoint probe loops, and each
    node's in/out counts are compared; an unbalanced node flags the graph
    invalid, which is the detection mechanism for broken symmetry.
    """
    lines = sorted(
        edges, key=lambda e: (e.plane_tag, tuple(np.round(e.polyline[0], 9)))
    )
    # Collect junction candidate positions from pairwise closest approaches.
    candidates = []
    for a in range(len(lines)):
        for b in range(a + 1, len(lines)):
            dist, i, j = _closest_approach(lines[a].polyline, lines[b].polyline)
            if dist < junction_tol:
                candidates.append(0.5 * (lines[a].polyline[i] + lines[b].polyline[j]))
    # Cluster candidates into node positions.
    nodes: list[np.ndarray] = []
    for c in candidates:
        for k, n in enumerate(nodes):
            if np.linalg.norm(c - n) < 2.0 * junction_tol:
                nodes[k] = 0.5 * (n + c)
                break
        else:
            nodes.append(c)
    if refine_line is not None:
        origin, direction = refine_line
        direction = np.asarray(direction, dtype=float)
        direction /= np.linalg.norm(direction)
        refined = []
        for n in nodes:
            t0 = float(np.dot(n - np.asarray(origin, dtype=float), direction))
            refined.append(_newton_on_line(build, origin, direction, t0))
        nodes = refined

    # Split the edges at the nodes and snap the cut vertices.
    graph_edges: list[GraphEdge] = []
    median_step = np.median(
        [np.median(np.linalg.norm(np.diff(l.polyline, axis=0), axis=1)) for l in lines]
    )
    if probe_radius is None:
        probe_radius = 3.0 * float(median_step)
    for line in lines:
        hits = []
        for node_id, node in enumerate(nodes):
            d = np.linalg.norm(line.polyline - node, axis=1)
            idx = int(np.argmin(d))
            if d[idx] < 2.0 * junction_tol:
                hits.append((idx, node_id))
        pieces = _split_polyline(line, hits)
        for pts, start_node, end_node in pieces:
            pts = pts.copy()
            if start_node is not None:
                pts[0] = nodes[start_node]
            if end_node is not None:
                pts[-1] = nodes[end_node]
            sub = ExceptionalLine(
                polyline=pts,
                closed=line.closed and start_node is None and end_node is None,
                plane_tag=line.plane_tag,
            )
            idx = sub.midpoint_index
            sign = probe_orientation(build, sub.polyline[idx], sub.tangent_at(idx), radius=probe_radius)
            sub = ExceptionalLine(
                polyline=sub.polyline, closed=sub.closed, plane_tag=sub.plane_tag, orientation=sign
            )
            graph_edges.append(GraphEdge(line=sub, start_node=start_node, end_node=end_node))

    # Flux bookkeeping per node.
    counts = [[0, 0] for _ in nodes]
    for ge in graph_edges:
        if ge.end_node is not None:
            counts[ge.end_node][0 if ge.line.orientation > 0 else 1] += 1
        if ge.start_node is not None:
            counts[ge.start_node][1 if ge.line.orientation > 0 else 0] += 1
    chain_nodes = tuple(
        ChainNode(position=np.asarray(n), n_in=c[0], n_out=c[1]) for n, c in zip(nodes, counts)
    )
    unbalanced = tuple(k for k, n in enumerate(chain_nodes) if not n.balanced)
    return ChainGraph(
        nodes=chain_nodes,
        edges=tuple(graph_edges),
        valid=len(unbalanced) == 0,
        unbalanced=unbalanced,
    )
