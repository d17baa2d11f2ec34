"""Quadratic matrix polynomials Q(w) = w^2 M - K + i w G and their spectra.

A system of N coupled damped oscillators yields a 2N-eigenvalue quadratic
problem Q(w) psi = 0.  Real coefficient matrices force the eigenfrequency
pairing (w, -w*); only the positive-real-frequency half is observable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import numkernel as nk

REAL_TOL = 1e-14
PF_GAP_RTOL = 1e-6
EP_OMEGA_RTOL = 1e-6
EP_OVERLAP = 1.0 - 1e-6


class SpectralGapError(RuntimeError):
    """No real line gap at Re(w) = 0."""


class NearSingularError(RuntimeError):
    """Q(w) evaluated too close to an eigenfrequency."""

    def __init__(self, message, nearest=None):
        super().__init__(message)
        self.nearest = nearest


@dataclass(frozen=True)
class QuadraticMatrixPolynomial:
    """Coefficient triple (mass, stiffness, damping), all N x N, mass nonsingular."""

    mass: np.ndarray
    stiffness: np.ndarray
    damping: np.ndarray

    def __post_init__(self):
        m = nk.as_matrix(self.mass)
        k = nk.as_matrix(self.stiffness)
        g = nk.as_matrix(self.damping)
        if not (m.shape == k.shape == g.shape) or m.shape[0] != m.shape[1]:
            raise ValueError("mass, stiffness, damping must be square and same shape")
        s = np.linalg.svd(m, compute_uv=False)
        if s[0] == 0.0 or s[-1] < 1e-12 * s[0]:
            raise ValueError("mass matrix is singular")
        object.__setattr__(self, "mass", m)
        object.__setattr__(self, "stiffness", k)
        object.__setattr__(self, "damping", g)

    @property
    def dim(self) -> int:
        return self.mass.shape[0]

    @property
    def is_real(self) -> bool:
        return max(
            np.abs(self.mass.imag).max(),
            np.abs(self.stiffness.imag).max(),
            np.abs(self.damping.imag).max(),
        ) < REAL_TOL

    def __call__(self, omega: complex) -> np.ndarray:
        return evaluate(self, omega)


@dataclass(frozen=True)
class EigenPair:
    omega: complex
    right: np.ndarray
    left: np.ndarray | None = None
    band_index: int = 0


@dataclass(frozen=True)
class Spectrum:
    """All 2N eigenpairs of a QMP, sorted by (Re, Im) of the frequency.

    `ep_clusters` lists index groups whose eigenvectors coalesced
    (near-defective: the exceptional-point signal); degenerate groups with
    orthogonal vectors are diabolic and not listed.
    """

    pairs: tuple[EigenPair, ...]
    pf_gap_ok: bool
    ep_clusters: tuple[tuple[int, ...], ...] = ()

    @property
    def omegas(self) -> np.ndarray:
        return np.array([p.omega for p in self.pairs])

    @property
    def has_ep(self) -> bool:
        return len(self.ep_clusters) > 0


def evaluate(q: QuadraticMatrixPolynomial, omega: complex) -> np.ndarray:
    """Q(w) = w^2 M - K + i w G."""
    return omega**2 * q.mass - q.stiffness + 1j * omega * q.damping


def linearize(q: QuadraticMatrixPolynomial) -> np.ndarray:
    """First-order companion form H = i [[0, 1], [-M^-1 K, -M^-1 G]].

    Eigenvalues of H are the QEP eigenfrequencies; eigenvectors stack as
    (psi, -i w psi).  For real M, K, G it satisfies H* = -H entrywise.
    """
    n = q.dim
    mk = np.linalg.solve(q.mass, q.stiffness)
    mg = np.linalg.solve(q.mass, q.damping)
    h = np.zeros((2 * n, 2 * n), dtype=complex)
    h[:n, n:] = np.eye(n)
    h[n:, :n] = -mk
    h[n:, n:] = -mg
    return 1j * h


def _poly_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(a) < len(b):
        a, b = b, a
    out = a.copy()
    out[: len(b)] += b
    return out


def _poly_det(entries: list[list[np.ndarray]]) -> np.ndarray:
    """Determinant of a matrix of ascending-coefficient polynomials."""
    n = len(entries)
    if n == 1:
        return entries[0][0]
    acc = np.zeros(1, dtype=complex)
    for j in range(n):
        minor = [[entries[r][c] for c in range(n) if c != j] for r in range(1, n)]
        term = np.convolve(entries[0][j], _poly_det(minor))
        acc = _poly_add(acc, (-1.0) ** j * term)
    return acc


def det_poly(q: QuadraticMatrixPolynomial) -> np.ndarray:
    """Ascending coefficients of det Q(w), a degree-2N polynomial.

    Built by direct polynomial expansion for N <= 3; via the companion
    form's characteristic polynomial (Faddeev-LeVerrier) above that.
    """
    n = q.dim
    if n <= 3:
        entries = [
            [
                np.array([-q.stiffness[i, j], 1j * q.damping[i, j], q.mass[i, j]])
                for j in range(n)
            ]
            for i in range(n)
        ]
        return _poly_det(entries)
    # det Q(w) = det(M) * det(wI - H) up to the (-1)^N convention; roots match.
    return np.linalg.det(q.mass) * nk.char_poly(linearize(q))


def _pf_gap_ok(omegas: np.ndarray) -> bool:
    # Relative gap test plus an absolute floor: a double root at the origin
    # is only located to about sqrt(root_tol), so tinier real parts are
    # indistinguishable from the axis (frequencies in natural units).
    top = np.abs(omegas).max()
    if top == 0.0:
        return False
    floor = 1e-6 * max(1.0, top)
    return bool(np.abs(omegas.real).min() > max(PF_GAP_RTOL * top, floor))


def solve(q: QuadraticMatrixPolynomial, tol: float = 1e-9, root_tol: float = 1e-12) -> Spectrum:
    """Full eigensolution of the QEP.

    Frequencies are the roots of det Q(w); right vectors are unit-norm
    gauge-fixed nullspace vectors of Q(w_n) from an SVD.  Root clusters
    closer than EP_OMEGA_RTOL whose nullspace dimension falls short of the
    multiplicity are flagged as exceptional when the extracted vectors
    overlap above EP_OVERLAP (orthogonal vectors mean a diabolic point).
    """
    omegas = nk.poly_roots(det_poly(q), tol=root_tol)
    order = np.lexsort((omegas.imag, omegas.real))
    omegas = omegas[order]
    scale = max(1.0, np.abs(omegas).max())
    # Coefficient scale: Q(w) evaluated exactly at a degeneracy can be the
    # zero matrix (diabolic case), so the nullspace threshold must not be
    # relative to Q(w) itself.
    coeff_scale = max(
        np.linalg.norm(q.mass, 2) * scale**2,
        np.linalg.norm(q.stiffness, 2),
        np.linalg.norm(q.damping, 2) * scale,
    )

    pairs: list[EigenPair] = []
    ep_clusters: list[tuple[int, ...]] = []
    for cluster in nk.cluster_indices(omegas, EP_OMEGA_RTOL * scale):
        center = omegas[cluster].mean()
        qc = evaluate(q, center)
        basis, _ = nk.nullspace(qc, rtol=1e-7, scale=coeff_scale)
        mult = len(cluster)
        dim = basis.shape[1]
        if dim >= mult:
            vecs = [nk.gauge_fix(basis[:, dim - mult + j]) for j in range(mult)]
        else:
            best = nk.gauge_fix(basis[:, -1])
            vecs = [best] * mult
            if mult > 1:
                ep_clusters.append(tuple(cluster))
        for idx, vec in zip(cluster, vecs):
            pairs.append(EigenPair(omega=complex(omegas[idx]), right=vec, band_index=idx))
    # Coalescence vs diabolic: only keep clusters whose vectors overlap.
    confirmed = []
    for cluster in ep_clusters:
        v0 = pairs[cluster[0]].right
        if all(abs(np.vdot(v0, pairs[i].right)) > EP_OVERLAP for i in cluster[1:]):
            confirmed.append(cluster)
    return Spectrum(
        pairs=tuple(pairs),
        pf_gap_ok=_pf_gap_ok(omegas),
        ep_clusters=tuple(confirmed),
    )


def attach_left_vectors(q: QuadraticMatrixPolynomial, spectrum: Spectrum) -> Spectrum:
    """Fill in left eigenvectors: nullspace of Q(w_n)^H, gauge-fixed."""
    new_pairs = []
    for p in spectrum.pairs:
        basis, _ = nk.nullspace(evaluate(q, p.omega).conj().T)
        new_pairs.append(replace(p, left=nk.gauge_fix(basis[:, -1])))
    return replace(spectrum, pairs=tuple(new_pairs))


def greens(q: QuadraticMatrixPolynomial, omega: complex, rtol: float = 1e-10) -> np.ndarray:
    """Transfer matrix G(w) = Q(w)^-1 away from eigenfrequencies."""
    qw = evaluate(q, omega)
    s = np.linalg.svd(qw, compute_uv=False)
    if s[0] == 0.0 or s[-1] < rtol * s[0]:
        spec = solve(q)
        nearest = spec.omegas[np.argmin(np.abs(spec.omegas - omega))]
        raise NearSingularError(
            f"Q({omega}) is singular within tolerance; nearest eigenfrequency {nearest}",
            nearest=nearest,
        )
    return np.linalg.solve(qw, np.eye(q.dim, dtype=complex))


def particle_hole_residual(spectrum: Spectrum) -> float:
    """Optimal-assignment distance between {w_n} and {-w_n*}.

    Zero (below 1e-9) for the spectrum of any real QMP.
    """
    w = spectrum.omegas
    target = -w.conj()
    cost = np.abs(w[:, None] - target[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def pf_bands(spectrum: Spectrum) -> list[EigenPair]:
    """The positive-real-frequency half, sorted by Re(w) ascending."""
    if not spectrum.pf_gap_ok:
        raise SpectralGapError("no real line gap at Re(w) = 0")
    pf = [p for p in spectrum.pairs if p.omega.real > 0]
    return sorted(pf, key=lambda p: (p.omega.real, p.omega.imag))


def qmp_to_json(q: QuadraticMatrixPolynomial) -> dict:
    """JSON object with complex entries encoded as [re, im] pairs."""

    def enc(m: np.ndarray):
        return [[[float(z.real), float(z.imag)] for z in row] for row in m]

    return {"M": enc(q.mass), "K": enc(q.stiffness), "G": enc(q.damping)}


def qmp_from_json(obj: dict) -> QuadraticMatrixPolynomial:
    def dec(rows):
        return np.array([[complex(re, im) for re, im in row] for row in rows])

    try:
        return QuadraticMatrixPolynomial(
            mass=dec(obj["M"]), stiffness=dec(obj["K"]), damping=dec(obj["G"])
        )
    except KeyError as exc:
        raise ValueError(f"QMP object missing key {exc}") from exc
