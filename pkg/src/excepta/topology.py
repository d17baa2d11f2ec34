"""Band continuation along parameter paths and braiding/winding invariants.

The central quantities are phase windings of continuous band differences:

* energy vorticity: winding of arg(w_m - w_n) along a closed loop, in
  half-integer units;
* discriminant numbers: windings of the product of squared band
  differences over the positive-frequency (PF), negative-frequency (NF),
  or full band set;
* the open-arc variant, quantized only when the arc's endpoints sit on
  the high-symmetry line where the PF discriminant is real.

Windings are accumulated from principal-value increments per segment;
adaptive path refinement keeps every increment well below pi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .qep import Spectrum, pf_bands, solve

QUANTIZATION_TOL = 1e-3
JUMP_FRACTION = 0.1
MIN_SEPARATION = 1e-8
MAX_BISECTIONS = 48


class TrackingError(RuntimeError):
    """Band continuation failed (EP on path or refinement exhausted)."""


class IsolationError(RuntimeError):
    """A probe loop cannot isolate a single puncture."""


@dataclass(frozen=True)
class ParameterPath:
    """Ordered polyline in the 3D parameter (or wavevector) space."""

    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[1] != 3:
            raise ValueError("path points must be 3-vectors")
        if len(pts) < 16:
            raise ValueError("path needs at least 16 points")
        object.__setattr__(self, "points", pts)

    @property
    def phis(self) -> np.ndarray:
        n = len(self.points) + (1 if self.closed else 0)
        return np.linspace(0.0, 2.0 * np.pi, n)

    def reversed(self) -> "ParameterPath":
        return ParameterPath(points=self.points[::-1].copy(), closed=self.closed)


def _frame(normal) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-handed orthonormal frame (u, v, n) with deterministic u choice."""
    n = np.asarray(normal, dtype=float)
    norm = np.linalg.norm(n)
    if norm == 0:
        raise ValueError("normal must be nonzero")
    n = n / norm
    seed = np.zeros(3)
    seed[int(np.argmin(np.abs(n)))] = 1.0
    u = np.cross(seed, n)
    u = u / np.linalg.norm(u)
    v = np.cross(n, u)
    return u, v, n


def circle_path(center, normal, radius: float, n: int = 64) -> ParameterPath:
    """Closed circle oriented counterclockwise about `normal` (right-hand rule)."""
    if n < 16:
        raise ValueError("need at least 16 samples on a loop")
    u, v, _ = _frame(normal)
    center = np.asarray(center, dtype=float)
    t = 2.0 * np.pi * np.arange(n) / n
    pts = center + radius * (np.outer(np.cos(t), u) + np.outer(np.sin(t), v))
    return ParameterPath(points=pts, closed=True)


def rect_path(center, u_axis, v_axis, half_u: float, half_v: float, n_per_edge: int = 16) -> ParameterPath:
    """Closed rectangle traversed counterclockwise in the (u, v) frame."""
    if n_per_edge < 4:
        raise ValueError("need at least 4 samples per edge")
    center = np.asarray(center, dtype=float)
    u = np.asarray(u_axis, dtype=float) * half_u
    v = np.asarray(v_axis, dtype=float) * half_v
    corners = [center + u + v, center - u + v, center - u - v, center + u - v]
    pts = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        for s in np.linspace(0.0, 1.0, n_per_edge, endpoint=False):
            pts.append((1 - s) * a + s * b)
    return ParameterPath(points=np.array(pts), closed=True)


def arc_path(start, end, via_direction, bulge: float, n: int = 64) -> ParameterPath:
    """Open half-ellipse from start to end bulging along via_direction."""
    if n < 16:
        raise ValueError("need at least 16 samples on an arc")
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    chord = end - start
    mid = 0.5 * (start + end)
    out = np.asarray(via_direction, dtype=float)
    out = out / np.linalg.norm(out)
    t = np.linspace(0.0, np.pi, n)
    pts = mid - 0.5 * np.cos(t)[:, None] * chord + bulge * np.sin(t)[:, None] * out
    return ParameterPath(points=pts, closed=False)


@dataclass(frozen=True)
class TrackedBands:
    """Column-continuous band frequencies along a (refined) path.

    For closed paths the final row is the starting spectrum in continued
    order, so `omegas[-1] = omegas[0][permutation]`.
    """

    points: np.ndarray
    omegas: np.ndarray
    closed: bool
    permutation: np.ndarray

    @property
    def n_bands(self) -> int:
        return self.omegas.shape[1]


def _band_frequencies(build, point, pf_only: bool) -> np.ndarray:
    spectrum = solve(build(point))
    if pf_only:
        return np.array([p.omega for p in pf_bands(spectrum)])
    w = spectrum.omegas
    return w[np.lexsort((w.imag, w.real))]


def _match(prev: np.ndarray, new: np.ndarray) -> np.ndarray:
    """Ordering of `new` minimizing sum |delta w|^2 against `prev`."""
    cost = np.abs(prev[:, None] - new[None, :]) ** 2
    _, cols = linear_sum_assignment(cost)
    return new[cols]


def _min_separation(w: np.ndarray) -> float:
    if len(w) < 2:
        return np.inf
    diff = np.abs(w[:, None] - w[None, :])
    np.fill_diagonal(diff, np.inf)
    return float(diff.min())


def track_bands(build, path: ParameterPath, pf_only: bool = True) -> TrackedBands:
    """Continue bands along the path, bisecting segments adaptively.

    A segment is accepted once the largest per-band jump is below
    JUMP_FRACTION of the smaller endpoint band separation; paths passing
    within MIN_SEPARATION of a degeneracy raise TrackingError with advice
    to perturb the path.
    """
    pts = list(path.points)
    if path.closed:
        pts = pts + [path.points[0]]

    out_points = [np.asarray(pts[0], dtype=float)]
    out_omegas = [_band_frequencies(build, pts[0], pf_only)]

    for target in pts[1:]:
        _extend_segment(build, out_points, out_omegas, np.asarray(target, float), pf_only, 0)

    omegas = np.array(out_omegas)
    n_bands = omegas.shape[1]
    if path.closed:
        start, finish = out_omegas[0], out_omegas[-1]
        cost = np.abs(finish[:, None] - start[None, :]) ** 2
        _, perm = linear_sum_assignment(cost)
    else:
        perm = np.arange(n_bands)
    return TrackedBands(
        points=np.array(out_points), omegas=omegas, closed=path.closed, permutation=perm
    )


def _extend_segment(build, out_points, out_omegas, target, pf_only, depth):
    """Append `target` (and any needed midpoints) continuing the last sample."""
    prev_pt = out_points[-1]
    prev_w = out_omegas[-1]
    new_w = _match(prev_w, _band_frequencies(build, target, pf_only))
    sep = min(_min_separation(prev_w), _min_separation(new_w))
    if sep < MIN_SEPARATION:
        raise TrackingError(
            "exceptional point lies on the path (band separation "
            f"{sep:.2e}); perturb the path away from it"
        )
    jump = float(np.abs(new_w - prev_w).max())
    same_point = bool(np.all(target == prev_pt))
    if jump > JUMP_FRACTION * sep and not same_point:
        if depth >= MAX_BISECTIONS:
            raise TrackingError("refinement exhausted without resolving band jump")
        mid = 0.5 * (prev_pt + target)
        _extend_segment(build, out_points, out_omegas, mid, pf_only, depth + 1)
        _extend_segment(build, out_points, out_omegas, target, pf_only, depth + 1)
        return
    out_points.append(target)
    out_omegas.append(new_w)


def _winding(values: np.ndarray) -> float:
    """Total unwrapped argument change / 2pi along a discrete trajectory."""
    ratio = values[1:] / values[:-1]
    inc = np.angle(ratio)
    if np.any(np.abs(inc) > 0.9 * np.pi):
        raise TrackingError("phase increment too close to pi; refine the path")
    return float(inc.sum() / (2.0 * np.pi))


def energy_vorticity(tb: TrackedBands, m: int = 0, n: int = 1) -> float:
    """Winding of arg(w_m - w_n) along a closed tracked loop, in turns.

    Half-quantized: the loop's final bands are a permutation of its initial
    ones, so twice the value counts the net braid exchanges.
    """
    if not tb.closed:
        raise ValueError("energy vorticity is defined on closed loops")
    if m == n:
        raise ValueError("bands m and n must differ")
    return _winding(tb.omegas[:, m] - tb.omegas[:, n])


def pf_discriminant(spectrum: Spectrum) -> complex:
    """Product of squared PF band differences (order-independent)."""
    pf = pf_bands(spectrum)
    w = np.array([p.omega for p in pf])
    acc = 1.0 + 0.0j
    for i in range(len(w)):
        for j in range(i + 1, len(w)):
            acc *= (w[i] - w[j]) ** 2
    return complex(acc)


def discriminant_tracked(tb: TrackedBands) -> np.ndarray:
    """Discriminant values along a tracked path from continuous columns."""
    n = tb.n_bands
    acc = np.ones(len(tb.omegas), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            acc *= (tb.omegas[:, i] - tb.omegas[:, j]) ** 2
    return acc


def _pairwise_winding_sum(tb: TrackedBands) -> float:
    total = 0.0
    for i in range(tb.n_bands):
        for j in range(i + 1, tb.n_bands):
            total += _winding(tb.omegas[:, i] - tb.omegas[:, j])
    return total


def discriminant_number(build, path: ParameterPath, which: str = "pf") -> float:
    """Winding of the chosen discriminant along a closed loop.

    which = "pf" | "nf" | "all".  Computed as twice the sum of pairwise
    band-difference windings, which keeps every per-segment increment small
    regardless of band count.  "all" on a real QMP is identically zero
    because conjugate-paired bands wind oppositely.
    """
    if which not in ("pf", "nf", "all"):
        raise ValueError("which must be 'pf', 'nf', or 'all'")
    if not path.closed:
        raise ValueError("discriminant numbers are defined on closed loops")
    if which == "pf":
        tb = track_bands(build, path, pf_only=True)
        return 2.0 * _pairwise_winding_sum(tb)
    tb = track_bands(build, path, pf_only=False)
    if which == "all":
        return 2.0 * _pairwise_winding_sum(tb)
    nf_cols = [i for i in range(tb.n_bands) if tb.omegas[0, i].real < 0]
    total = 0.0
    for a in range(len(nf_cols)):
        for b in range(a + 1, len(nf_cols)):
            total += _winding(tb.omegas[:, nf_cols[a]] - tb.omegas[:, nf_cols[b]])
    return 2.0 * total


def arc_invariant(build, arc: ParameterPath, endpoint_tol: float = 1e-10) -> float:
    """PF-discriminant winding along an open arc ending on the gamma=kappa=0 line.

    On that line the PF discriminant is real, so the accumulated phase is
    pinned to multiples of pi at both ends and the value is half-quantized;
    twice its magnitude counts chain points between the endpoints, the sign
    their chirality.  Breaking the protecting symmetries detunes the value
    off the half-integer lattice.
    """
    if arc.closed:
        raise ValueError("arc invariant wants an open path")
    for end in (arc.points[0], arc.points[-1]):
        if max(abs(end[0]), abs(end[2])) > 1e-9:
            raise ValueError("arc endpoints must lie on the gamma = kappa = 0 line")
    tb = track_bands(build, arc, pf_only=True)
    disc = discriminant_tracked(tb)
    for label, val in (("start", disc[0]), ("end", disc[-1])):
        if abs(val) < endpoint_tol:
            raise ValueError(f"arc {label}point is degenerate (|discriminant| < {endpoint_tol})")
    return 2.0 * _pairwise_winding_sum(tb)


@dataclass(frozen=True)
class SurfaceMesh:
    """Closed oriented quad/triangle surface used by the source-free audit."""

    vertices: np.ndarray
    faces: tuple[tuple[int, ...], ...]
    kind: str

    def euler_characteristic(self) -> int:
        edges = set()
        for face in self.faces:
            for a, b in zip(face, face[1:] + face[:1]):
                edges.add((min(a, b), max(a, b)))
        return len(self.vertices) - len(edges) + len(self.faces)


@dataclass(frozen=True)
class BoxSurface:
    """Axis-aligned box; loops around punctures live in the face planes."""

    lo: np.ndarray
    hi: np.ndarray
    mesh: SurfaceMesh

    def face_of(self, point, tol=1e-8) -> tuple[int, float]:
        p = np.asarray(point, dtype=float)
        for axis in range(3):
            for side, val in ((-1.0, self.lo[axis]), (1.0, self.hi[axis])):
                if abs(p[axis] - val) < tol:
                    return axis, side
        raise ValueError("point does not lie on the box surface")

    def loop_around(self, point, radius: float, n: int = 64) -> ParameterPath:
        axis, side = self.face_of(point)
        normal = np.zeros(3)
        normal[axis] = side
        return circle_path(point, normal, radius, n)


@dataclass(frozen=True)
class SphereSurface:
    center: np.ndarray
    radius: float
    mesh: SurfaceMesh

    def loop_around(self, point, radius: float, n: int = 64) -> ParameterPath:
        p = np.asarray(point, dtype=float)
        normal = p - self.center
        flat = circle_path(p, normal, radius, n)
        # Re-project the loop onto the sphere to keep it on the surface.
        rel = flat.points - self.center
        rel *= self.radius / np.linalg.norm(rel, axis=1)[:, None]
        return ParameterPath(points=self.center + rel, closed=True)


def box_surface(lo, hi, n_per_edge: int = 8) -> BoxSurface:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(hi <= lo):
        raise ValueError("box must have positive extent")
    n = max(2, n_per_edge)
    verts: list[np.ndarray] = []
    faces: list[tuple[int, ...]] = []
    index: dict[tuple[float, ...], int] = {}

    def vid(p):
        key = tuple(np.round(p, 12))
        if key not in index:
            index[key] = len(verts)
            verts.append(np.asarray(p))
        return index[key]

    for axis in range(3):
        u, v = (axis + 1) % 3, (axis + 2) % 3
        for side_val, orient in ((lo[axis], -1), (hi[axis], 1)):
            us = np.linspace(lo[u], hi[u], n)
            vs = np.linspace(lo[v], hi[v], n)
            for i in range(n - 1):
                for j in range(n - 1):
                    quad = []
                    for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        p = np.zeros(3)
                        p[axis] = side_val
                        p[u] = us[i + du]
                        p[v] = vs[j + dv]
                        quad.append(vid(p))
                    if orient < 0:
                        quad = quad[::-1]
                    faces.append(tuple(quad))
    mesh = SurfaceMesh(vertices=np.array(verts), faces=tuple(faces), kind="box")
    return BoxSurface(lo=lo, hi=hi, mesh=mesh)


def sphere_surface(center, radius: float, n_theta: int = 8, n_phi: int = 16) -> SphereSurface:
    center = np.asarray(center, dtype=float)
    if radius <= 0:
        raise ValueError("radius must be positive")
    verts = [center + np.array([0.0, 0.0, radius])]
    rings = []
    thetas = np.linspace(0.0, np.pi, n_theta + 1)[1:-1]
    for th in thetas:
        ring = []
        for ph in 2.0 * np.pi * np.arange(n_phi) / n_phi:
            ring.append(len(verts))
            verts.append(
                center
                + radius
                * np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
            )
        rings.append(ring)
    south = len(verts)
    verts.append(center + np.array([0.0, 0.0, -radius]))

    faces: list[tuple[int, ...]] = []
    for j in range(n_phi):
        faces.append((0, rings[0][j], rings[0][(j + 1) % n_phi]))
    for a, b in zip(rings, rings[1:]):
        for j in range(n_phi):
            jn = (j + 1) % n_phi
            faces.append((a[j], b[j], b[jn], a[jn]))
    for j in range(n_phi):
        jn = (j + 1) % n_phi
        faces.append((south, rings[-1][jn], rings[-1][j]))
    mesh = SurfaceMesh(vertices=np.array(verts), faces=tuple(faces), kind="sphere")
    return SphereSurface(center=center, radius=radius, mesh=mesh)


@dataclass(frozen=True)
class AuditResult:
    pfdns: tuple[int, ...]
    total: int


def surface_audit(build, surface, punctures, loop_radius: float | None = None, n: int = 64) -> AuditResult:
    """Sum of PF discriminant numbers of outward-oriented loops at punctures.

    The source-free contract: the total is zero on any closed surface whose
    PF/NF bands stay line-gapped.  Raises IsolationError when punctures are
    too close for the probe radius to separate them.
    """
    pts = [np.asarray(p, dtype=float) for p in punctures]
    if not pts:
        return AuditResult(pfdns=(), total=0)
    scale = float(np.linalg.norm(np.ptp(surface.mesh.vertices, axis=0)))
    if loop_radius is None:
        loop_radius = 0.05 * scale
    if len(pts) > 1:
        gaps = [np.linalg.norm(a - b) for i, a in enumerate(pts) for b in pts[i + 1:]]
        if min(gaps) < 3.0 * loop_radius:
            raise IsolationError(
                f"puncture spacing {min(gaps):.3e} cannot isolate loops of radius "
                f"{loop_radius:.3e}; refine the mesh or shrink the radius"
            )
    pfdns = []
    for p in pts:
        loop = surface.loop_around(p, loop_radius, n)
        val = discriminant_number(build, loop, which="pf")
        rounded = int(round(val))
        if abs(val - rounded) > QUANTIZATION_TOL:
            raise TrackingError(f"puncture PFDN {val} is not integer-quantized")
        pfdns.append(rounded)
    return AuditResult(pfdns=tuple(pfdns), total=int(sum(pfdns)))
