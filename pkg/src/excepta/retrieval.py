"""Synthetic response spectra and least-squares parameter retrieval.

The observable is the driven steady-state magnitude |c G_mn(2 pi f)| of the
transfer matrix G = Q^-1 for excitation at oscillator n and readout at m.
Fitting those four magnitude curves recovers the stiffness/damping
parameters of the loss-biased two-oscillator model; magnitudes only, as
phases are not used.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .numkernel import ConvergenceError

PARAM_NAMES = ("kappa0", "gamma0", "chi", "dchi", "kappa", "gamma", "c")


@dataclass(frozen=True)
class ResponseSpectra:
    """|response| magnitude curves on a common frequency axis (Hz)."""

    freqs: np.ndarray
    curves: np.ndarray  # (2, 2, F): [probe m, source n, frequency]
    noise_level: float = 0.0

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        c = np.asarray(self.curves, dtype=float)
        if f.ndim != 1 or np.any(np.diff(f) <= 0):
            raise ValueError("freqs must be strictly increasing")
        if c.shape != (2, 2, len(f)):
            raise ValueError("curves must have shape (2, 2, len(freqs))")
        if np.any(c < 0):
            raise ValueError("magnitudes must be nonnegative")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "curves", c)


def response_magnitudes(params: dict, freqs) -> np.ndarray:
    """c |G_mn(2 pi f)| for the loss-biased pair at m0 = 1.

    Closed-form 2x2 inverse vectorized over the frequency axis.
    """
    w = 2.0 * np.pi * np.asarray(freqs, dtype=float)
    k11 = params["kappa0"] + params["chi"]
    k12 = -params["chi"]
    k21 = -params["chi"] - params["dchi"]
    k22 = params["kappa0"] - params["kappa"] + params["chi"]
    g11 = params["gamma0"] + params["gamma"] / 2.0
    g22 = params["gamma0"] - params["gamma"] / 2.0
    q11 = w**2 - k11 + 1j * w * g11
    q12 = -k12 + 0j * w
    q21 = -k21 + 0j * w
    q22 = w**2 - k22 + 1j * w * g22
    det = q11 * q22 - q12 * q21
    out = np.empty((2, 2, len(w)))
    out[0, 0] = np.abs(q22 / det)
    out[0, 1] = np.abs(-q12 / det)
    out[1, 0] = np.abs(-q21 / det)
    out[1, 1] = np.abs(q11 / det)
    return params["c"] * out


def synth_response(params: dict, freqs, noise: float = 0.0, seed: int = 0) -> ResponseSpectra:
    """Noisy synthetic spectra: multiplicative (1 + noise * u), u ~ U(-1, 1).

    The uniform draws come from a seeded generator in a fixed (m, n, f)
    order, so identical seeds give identical spectra.
    """
    clean = response_magnitudes(params, freqs)
    if noise:
        rng = np.random.default_rng(seed)
        u = rng.uniform(-1.0, 1.0, size=clean.shape)
        clean = clean * (1.0 + noise * u)
    return ResponseSpectra(freqs=np.asarray(freqs, dtype=float), curves=clean, noise_level=noise)


@dataclass(frozen=True)
class FitModel:
    """Free parameters with finite bounds; everything else pinned in `fixed`.

    The response scale c is always free (magnitude data cannot pin the
    absolute excitation strength any other way).
    """

    free: tuple[str, ...]
    bounds: dict[str, tuple[float, float]]
    fixed: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if "c" not in self.free:
            raise ValueError("the response scale 'c' must be a free parameter")
        for name in self.free:
            if name not in PARAM_NAMES:
                raise ValueError(f"unknown parameter {name!r}")
            lo, hi = self.bounds[name]
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"bounds for {name!r} must be finite with lo < hi")
        for name in self.fixed:
            if name not in PARAM_NAMES:
                raise ValueError(f"unknown parameter {name!r}")

    def assemble(self, theta) -> dict:
        params = {name: 0.0 for name in PARAM_NAMES}
        params.update(self.fixed)
        params.update(dict(zip(self.free, theta)))
        return params


@dataclass(frozen=True)
class FitResult:
    params: dict
    rms_residual: float
    curvature: dict


def _objective(model: FitModel, data: ResponseSpectra):
    target = data.curves

    def f(theta):
        pred = response_magnitudes(model.assemble(theta), data.freqs)
        return float(np.sum((pred - target) ** 2))

    return f


def _quadratic_polish(f, x, lo, hi, rounds: int = 4):
    """Coordinate-wise parabola steps with a shrinking probe; exact on quadratics."""
    x = x.copy()
    fx = f(x)
    scales = np.maximum(np.abs(x), (hi - lo) * 1e-3)
    for r in range(rounds):
        h_rel = 10.0 ** (-(3 + r))
        for i in range(len(x)):
            h = scales[i] * h_rel
            xp = x.copy()
            xm = x.copy()
            xp[i] = min(x[i] + h, hi[i])
            xm[i] = max(x[i] - h, lo[i])
            fp, fm = f(xp), f(xm)
            denom = fp - 2.0 * fx + fm
            if denom > 0:
                step = 0.5 * (fm - fp) / denom * h
                trial = x.copy()
                trial[i] = np.clip(x[i] + step, lo[i], hi[i])
                ft = f(trial)
                if ft < fx:
                    x, fx = trial, ft
            elif fp < fx or fm < fx:
                x, fx = (xp, fp) if fp < fm else (xm, fm)
    return x, fx


def fit_parameters(data: ResponseSpectra, model: FitModel, starts: int = 16, seed: int = 0) -> FitResult:
    """Multi-start Nelder-Mead over the free parameters, then quadratic polish.

    Starts are drawn uniformly inside the bounds from a seeded generator;
    the winner is the (residual, then lexicographic-parameter) minimum, so
    results are reproducible.  Derivative-free search is deliberate: the
    magnitude curves have |.| kinks near antiresonances.
    """
    if len(data.freqs) < 50:
        raise ValueError("need at least 50 frequency samples")
    lo = np.array([model.bounds[n][0] for n in model.free])
    hi = np.array([model.bounds[n][1] for n in model.free])
    f = _objective(model, data)
    # Scrambled low-discrepancy starts cover the box far more evenly than
    # iid draws, which matters when a secondary least-squares basin exists.
    sobol = qmc.Sobol(d=len(model.free), scramble=True, seed=seed)
    draw = sobol.random(int(2 ** np.ceil(np.log2(max(starts, 2)))))[:starts]
    start_points = lo + (hi - lo) * draw

    nm_options = {"xatol": 1e-12, "fatol": 1e-16, "maxiter": 4000, "maxfev": 6000}

    def descend(point):
        res = minimize(f, point, method="Nelder-Mead", bounds=list(zip(lo, hi)), options=nm_options)
        return _quadratic_polish(f, res.x, lo, hi)

    best = []
    f_init_best = min(f(s) for s in start_points)
    for s in start_points:
        x, fx = descend(s)
        best.append((fx, tuple(x)))
    best.sort(key=lambda t: (t[0], t[1]))
    fx, x = best[0]
    x = np.array(x)
    # A restart from the winner shakes off Nelder-Mead stalls.
    x2, fx2 = descend(x)
    if fx2 < fx:
        x, fx = x2, fx2
    if fx >= f_init_best:
        raise ConvergenceError(
            "no start improved on its initial residual", best=model.assemble(x), residual=fx
        )

    n_data = data.curves.size
    curvature = {}
    for i, name in enumerate(model.free):
        h = max(abs(x[i]), 1e-6) * 1e-4
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        curvature[name] = float((f(xp) - 2.0 * fx + f(xm)) / h**2)
    return FitResult(
        params=model.assemble(x),
        rms_residual=float(np.sqrt(fx / n_data)),
        curvature=curvature,
    )


def chi_parabola_fit(points, through_origin: bool = False) -> tuple[float, float, float]:
    """Least squares of chi = a0 + a2 r^2 over (r, chi) points.

    Returns (a0, a2, rms_residual); with through_origin the constant term
    is pinned to zero.  Two distinct |r| values (or one, when pinned)
    determine the fit exactly.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("need at least two (r, chi) points")
    r2 = pts[:, 0] ** 2
    y = pts[:, 1]
    if through_origin:
        design = r2[:, None]
    else:
        design = np.stack([np.ones_like(r2), r2], axis=1)
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise ValueError("degenerate abscissae: r values do not determine the fit")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = design @ coef - y
    rms = float(np.sqrt(np.mean(resid**2)))
    if through_origin:
        return 0.0, float(coef[0]), rms
    return float(coef[0]), float(coef[1]), rms


def spectra_to_csv(spectra: ResponseSpectra) -> str:
    """CSV with header f,|t11|,|t12|,|t21|,|t22| (12 significant digits)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["f", "|t11|", "|t12|", "|t21|", "|t22|"])
    for i, f in enumerate(spectra.freqs):
        row = [f] + [spectra.curves[m, n, i] for m in range(2) for n in range(2)]
        writer.writerow([f"{v:.12g}" for v in row])
    return buf.getvalue()


def spectra_from_csv(text: str) -> ResponseSpectra:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header[:1] != ["f"] or len(header) != 5:
        raise ValueError("expected header f,|t11|,|t12|,|t21|,|t22|")
    rows = [list(map(float, row)) for row in reader if row]
    arr = np.array(rows)
    curves = np.empty((2, 2, len(arr)))
    curves[0, 0] = arr[:, 1]
    curves[0, 1] = arr[:, 2]
    curves[1, 0] = arr[:, 3]
    curves[1, 1] = arr[:, 4]
    return ResponseSpectra(freqs=arr[:, 0], curves=curves)
