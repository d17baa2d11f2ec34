"""3D lattice bands, the analytic chain point, and needle-pulse dynamics.

The Bloch problem is a 2x2 QMP per wavevector.  On the ky axis the chain
point of the exceptional-line network has a closed-form location; around
it the real parts of the two positive-frequency bands cross linearly along
kz and the imaginary parts along kx.  A wavepacket built from both bands
around that point splits into two counter-propagating pulses whose
transverse growth is set by the imaginary-band edge of the truncation
window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .models import LatticeParams, lattice_bloch_qmp
from .qep import pf_bands, solve
from .topology import pf_discriminant


class ChainPointError(ValueError):
    """The closed form has no solution on the ky axis for these parameters."""


def chain_point_coords(p: LatticeParams) -> np.ndarray:
    """Closed-form chain-point wavevector (0, ky, 0).

    On the ky axis the two PF bands collide where the transverse coupling
    matches the damping: cx = gamma * sqrt(c0/m - gamma^2/(4 m^2)) with
    c0 = kappa0 + kappa1 + kappa2 + 4 chi and
    cx = kappa1 + kappa2 + 4 chi cos ky, giving

        ky = arccos[ (-(kappa1+kappa2) + gamma sqrt(c0/m - gamma^2/(4m^2))) / (4 chi) ]
    """
    c0 = p.kappa0 + p.kappa1 + p.kappa2 + 4.0 * p.chi
    inner = c0 / p.m - p.gamma**2 / (4.0 * p.m**2)
    if inner < 0:
        raise ChainPointError("no chain point on this axis for these parameters")
    arg = (-(p.kappa1 + p.kappa2) + p.gamma * np.sqrt(inner)) / (4.0 * p.chi)
    if abs(arg) > 1.0:
        raise ChainPointError("no chain point on this axis for these parameters")
    return np.array([0.0, float(np.arccos(arg)), 0.0])


@dataclass(frozen=True)
class BandField:
    """PF bands tracked over a fixed-ky (kx, kz) grid.

    `bad_cells` marks grid nodes where continuation was ambiguous (band
    separation at the matching threshold), typically EL punctures.
    """

    kx: np.ndarray
    kz: np.ndarray
    ky: float
    omegas: np.ndarray  # (nx, nz, 2), column-continuous
    vectors: np.ndarray  # (nx, nz, 2, 2) right eigenvectors (band, component)
    bad_cells: tuple[tuple[int, int], ...]


def _pf_pairs_at(p: LatticeParams, k) -> list:
    return pf_bands(solve(lattice_bloch_qmp(p.at(k))))


def band_slice(
    p: LatticeParams,
    ky: float,
    grid: tuple[int, int] = (32, 32),
    window: tuple = ((-np.pi, np.pi), (-np.pi, np.pi)),
) -> BandField:
    """Track the two PF bands over a (kx, kz) grid at fixed ky.

    Rows are matched left-to-right and each row to the one before it by
    minimal |delta omega|; nodes where the match margin is degenerate are
    recorded in bad_cells rather than aborting.
    """
    nx, nz = grid
    if nx < 2 or nz < 2:
        raise ValueError("grid must be at least 2 x 2")
    (kx0, kx1), (kz0, kz1) = window
    kxs = np.linspace(kx0, kx1, nx)
    kzs = np.linspace(kz0, kz1, nz)
    omegas = np.zeros((nx, nz, 2), dtype=complex)
    vectors = np.zeros((nx, nz, 2, 2), dtype=complex)
    bad: list[tuple[int, int]] = []

    def solve_node(i, j):
        pairs = _pf_pairs_at(p, (kxs[i], ky, kzs[j]))
        w = np.array([q.omega for q in pairs])
        v = np.array([q.right for q in pairs])
        return w, v

    def match(ref_w, w, v):
        cost = np.abs(ref_w[:, None] - w[None, :]) ** 2
        _, cols = linear_sum_assignment(cost)
        # Band identity is genuinely ambiguous only where the bands nearly
        # coalesce (an exceptional-line puncture of the slice).
        ambiguous = abs(w[cols[0]] - w[cols[1]]) < 1e-6 * max(1.0, np.abs(w).max())
        return w[cols], v[cols], ambiguous

    for i in range(nx):
        for j in range(nz):
            w, v = solve_node(i, j)
            if i == 0 and j == 0:
                omegas[0, 0], vectors[0, 0] = w, v
                continue
            ref = omegas[i, j - 1] if j > 0 else omegas[i - 1, j]
            w, v, ambiguous = match(ref, w, v)
            omegas[i, j], vectors[i, j] = w, v
            if ambiguous:
                bad.append((i, j))
    return BandField(
        kx=kxs, kz=kzs, ky=ky, omegas=omegas, vectors=vectors, bad_cells=tuple(bad)
    )


def crossing_slopes(p: LatticeParams, center, axis: str, half_range: float, n: int = 9):
    """Fitted linear rates of the PF band splitting along one coordinate axis.

    Returns (re_slope, im_slope): least-squares coefficients of
    |Re(w1 - w2)| = re_slope * |t| and likewise for the imaginary part.
    At a chain point exactly one of the two is nonzero per axis (the bands
    cross linearly in Re along kz and in Im along kx).
    """
    center = np.asarray(center, dtype=float)
    ax = {"x": 0, "y": 1, "z": 2}[axis]
    ts = np.concatenate([np.linspace(-half_range, -half_range / n, n), np.linspace(half_range / n, half_range, n)])
    re_abs, im_abs = [], []
    for t in ts:
        k = center.copy()
        k[ax] += t
        w = np.array([q.omega for q in _pf_pairs_at(p, k)])
        re_abs.append(abs((w[0] - w[1]).real))
        im_abs.append(abs((w[0] - w[1]).imag))
    tt = np.abs(ts)
    denom = float(np.dot(tt, tt))
    re_slope = float(np.dot(tt, re_abs) / denom)
    im_slope = float(np.dot(tt, im_abs) / denom)
    return re_slope, im_slope


def refine_chain_point_on_axis(p: LatticeParams, ky0: float, tol: float = 1e-12) -> float:
    """1D Newton zero of the (real) PF discriminant along the ky axis."""
    ky = float(ky0)
    for _ in range(60):
        val = pf_discriminant(solve(lattice_bloch_qmp(p.at((0.0, ky, 0.0))))).real
        h = 1e-7
        vp = pf_discriminant(solve(lattice_bloch_qmp(p.at((0.0, ky + h, 0.0))))).real
        vm = pf_discriminant(solve(lattice_bloch_qmp(p.at((0.0, ky - h, 0.0))))).real
        slope = (vp - vm) / (2.0 * h)
        if slope == 0:
            break
        step = -val / slope
        ky += step
        if abs(step) < tol:
            break
    return ky


@dataclass(frozen=True)
class WavepacketSpec:
    """Gaussian k-space profile, hard rectangular cutoff, grid resolution.

    The initial amplitude exp(-(kx^2+kz^2)/(4 q^2)) is shared by both PF
    bands and vanishes identically outside |kx|,|kz| <= kmax/2.
    """

    q: float = 0.05 * np.pi
    kmax: float = 0.4 * np.pi
    grid: tuple[int, int] = (64, 64)

    def __post_init__(self):
        if self.q <= 0 or self.kmax <= 0:
            raise ValueError("q and kmax must be positive")
        if min(self.grid) < 8:
            raise ValueError("k-grid must be at least 8 x 8")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        nx, nz = self.grid
        half = 0.5 * self.kmax
        return np.linspace(-half, half, nx), np.linspace(-half, half, nz)

    def amplitude(self, kx: np.ndarray, kz: np.ndarray) -> np.ndarray:
        kx2 = kx[:, None] ** 2
        kz2 = kz[None, :] ** 2
        return np.exp(-(kx2 + kz2) / (4.0 * self.q**2))


@dataclass(frozen=True)
class WaveField:
    """Snapshot of the slab field: total and per-band 4-component arrays.

    Components are (u_A, u_B, du_A/dt, du_B/dt) per site; total equals the
    sum of the band parts by construction.  a_ref is the peak amplitude of
    the t = 0 field used to normalize growth curves.
    """

    t: float
    x: np.ndarray
    z: np.ndarray
    total: np.ndarray  # (4, Lx, Lz)
    bands: tuple[np.ndarray, np.ndarray]
    a_ref: float
    boundary_contaminated: bool


@dataclass(frozen=True)
class PulseMetrics:
    centroid_z: float
    log_amplitude: float
    width_x: float
    width_z: float
    aspect: float


def _tracked_window_bands(p: LatticeParams, spec: WavepacketSpec, ky: float):
    """Continuous bands and 4-component eigenvectors over the k window."""
    kxs, kzs = spec.axes()
    field = band_slice(
        p, ky, grid=spec.grid, window=((kxs[0], kxs[-1]), (kzs[0], kzs[-1]))
    )
    omegas = field.omegas  # (nx, nz, 2)
    psis = field.vectors  # (nx, nz, 2, 2)
    # Stack displacement and velocity halves: (psi, -i w psi), unit norm,
    # with the displacement gauge inherited from the solver.
    full = np.zeros((*psis.shape[:2], 2, 4), dtype=complex)
    full[..., :2] = psis
    full[..., 2:] = -1j * omegas[..., None] * psis
    full /= np.linalg.norm(full, axis=-1, keepdims=True)
    return omegas, full


def evolve_wavepacket(
    p: LatticeParams,
    spec: WavepacketSpec,
    times,
    slab: tuple[int, int] = (256, 256),
    ky: float | None = None,
    boundary_tol: float = 1e-6,
) -> list[WaveField]:
    """Spectral time evolution of the two-band wavepacket over a slab.

    Field(t; x, z) = sum_n sum_k w_k A0(k) e^{-i w_n(k) t} |Psi_n(k)> e^{i k r},
    evaluated as two matrix products per band and component (the k-sum is
    separable in x and z).  Trapezoid weights on the fixed k-grid make the
    quadrature deterministic; evolving 2 A0 gives exactly doubled fields.
    """
    if ky is None:
        ky = float(chain_point_coords(p)[1])
    lx, lz = slab
    xs = np.arange(lx) - lx // 2
    zs = np.arange(lz) - lz // 2
    kxs, kzs = spec.axes()
    omegas, vecs = _tracked_window_bands(p, spec, ky)

    wx = np.ones(len(kxs))
    wx[0] = wx[-1] = 0.5
    wz = np.ones(len(kzs))
    wz[0] = wz[-1] = 0.5
    dk = (kxs[1] - kxs[0]) * (kzs[1] - kzs[0])
    weights = dk * np.outer(wx, wz) * spec.amplitude(kxs, kzs)

    ex = np.exp(1j * np.outer(kxs, xs))  # (nx, Lx)
    ez = np.exp(1j * np.outer(kzs, zs))  # (nz, Lz)

    def field_at(t: float):
        parts = []
        for band in range(2):
            phase = weights * np.exp(-1j * omegas[..., band] * t)
            comp = np.empty((4, lx, lz), dtype=complex)
            for c in range(4):
                comp[c] = ex.T @ (phase * vecs[..., band, c]) @ ez
            parts.append(comp)
        return parts

    base = field_at(0.0)
    a_ref = float(max(np.abs(base[0] + base[1]).max(), 1e-300))

    out = []
    for t in times:
        parts = field_at(float(t)) if t != 0.0 else base
        total = parts[0] + parts[1]
        edge = max(
            np.abs(total[:, 0, :]).max(),
            np.abs(total[:, -1, :]).max(),
            np.abs(total[:, :, 0]).max(),
            np.abs(total[:, :, -1]).max(),
        )
        contaminated = edge > boundary_tol * np.abs(total).max()
        out.append(
            WaveField(
                t=float(t),
                x=xs,
                z=zs,
                total=total,
                bands=(parts[0], parts[1]),
                a_ref=a_ref,
                boundary_contaminated=bool(contaminated),
            )
        )
    return out


def max_growth_rates(p: LatticeParams, spec: WavepacketSpec, ky: float | None = None) -> tuple[float, float]:
    """Largest Im(omega) of each band over the truncation window."""
    if ky is None:
        ky = float(chain_point_coords(p)[1])
    omegas, _ = _tracked_window_bands(p, spec, ky)
    return (
        float(omegas[..., 0].imag.max()),
        float(omegas[..., 1].imag.max()),
    )


def field_to_csv(w: WaveField) -> str:
    """Plain-text dump: x, z, then Re/Im of the 4 field components per site."""
    import csv as _csv
    import io as _io

    buf = _io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["x", "z"]
        + [f"{p}_{c}" for c in ("uA", "uB", "vA", "vB") for p in ("re", "im")]
    )
    for i, x in enumerate(w.x):
        for j, z in enumerate(w.z):
            vals = []
            for c in range(4):
                vals.extend([w.total[c, i, j].real, w.total[c, i, j].imag])
            writer.writerow([f"{v:.12g}" for v in [float(x), float(z)] + vals])
    return buf.getvalue()


def pulse_metrics(w: WaveField, band: int) -> PulseMetrics:
    """Centroid, growth, and RMS shape diagnostics of one band's pulse.

    Intensity is the displacement-component power |u_A|^2 + |u_B|^2;
    log_amplitude is ln(max|field| / a_ref); widths are RMS second moments
    along x and z and aspect their ratio.
    """
    if band not in (1, 2):
        raise ValueError("band must be 1 or 2")
    f = w.bands[band - 1]
    intensity = (np.abs(f[0]) ** 2 + np.abs(f[1]) ** 2).real
    total = intensity.sum()
    if total <= 0:
        raise ValueError("zero field")
    px = intensity.sum(axis=1) / total
    pz = intensity.sum(axis=0) / total
    cx = float(np.dot(px, w.x))
    cz = float(np.dot(pz, w.z))
    width_x = float(np.sqrt(np.dot(px, (w.x - cx) ** 2)))
    width_z = float(np.sqrt(np.dot(pz, (w.z - cz) ** 2)))
    amp = float(np.sqrt(intensity.max()))
    return PulseMetrics(
        centroid_z=cz,
        log_amplitude=float(np.log(max(amp, 1e-300) / w.a_ref)),
        width_x=width_x,
        width_z=width_z,
        aspect=width_x / width_z if width_z > 0 else np.inf,
    )
