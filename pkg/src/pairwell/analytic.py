"""Sharp-wall (w -> 0) three-region model of the asymmetric well.

Regions: I ``z < -d`` (potential 0), II ``-d < z < 0`` (well, ``-V2``),
III ``z > 0`` (``V1 - V2``). Energies are in units of c^2 throughout this
module; momenta returned by :func:`region_momenta` are in atomic units.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np
from scipy import optimize, stats

from .dirac_core import WellParams

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 100
DEDUP_TOL = 1e-8
SCAN_POINTS = 20001


class Method(str, Enum):
    REAL_ROOT = "real_root"
    CONTINUATION = "complex_continuation"
    TRANSMISSION = "transmission_peak"


# ---------------------------------------------------------------------------
# momenta, matching factors, residual
# ---------------------------------------------------------------------------


class RegionMomenta(NamedTuple):
    p1: complex
    p2: complex
    p3: complex
    outgoing1: bool
    outgoing3: bool


class MatchingFactors(NamedTuple):
    gamma: complex
    tau: complex


def _exterior_root(q2, eps):
    """sqrt with Im >= 0, except on the open continua ``|Re eps| > 1`` where
    the root takes the sign of ``Re eps`` (outgoing wave)."""
    s = np.sqrt(np.asarray(q2, dtype=complex))
    s = np.where(s.imag >= 0, s, -s)
    eps = np.asarray(eps, dtype=complex)
    open_ = np.abs(eps.real) > 1
    return np.where(open_, np.sign(eps.real) * s, s), open_


def _interior_root(q2):
    s = np.sqrt(np.asarray(q2, dtype=complex))
    # Re >= 0 on the real axis, Im >= 0 when purely imaginary
    flip = (s.real < 0) | ((s.real == 0) & (s.imag < 0))
    return np.where(flip, -s, s)


def _reduced(e, params: WellParams):
    e = np.asarray(e, dtype=complex)
    e1, e2, e3 = e, e + params.v2, e + params.v2 - params.v1
    q1, o1 = _exterior_root(e1 * e1 - 1, e1)
    q2 = _interior_root(e2 * e2 - 1)
    q3, o3 = _exterior_root(e3 * e3 - 1, e3)
    return (e1, e2, e3), (q1, q2, q3), (o1, o3)


def region_momenta(energy: complex, params: WellParams) -> RegionMomenta:
    """Momenta ``p_k = c q_k`` with ``q_k^2 = e_k^2 - 1`` in each region."""
    _, (q1, q2, q3), (o1, o3) = _reduced(energy, params)
    c = params.c
    return RegionMomenta(complex(c * q1), complex(c * q2), complex(c * q3), bool(o1), bool(o3))


def _factors(e, params):
    (e1, e2, e3), (q1, q2, q3), _ = _reduced(e, params)
    gamma = q1 / (e1 + 1) * (e2 + 1) / q2
    tau = q2 / (e2 + 1) * (e3 + 1) / q3
    return gamma, tau, q2


def matching_factors(energy: complex, params: WellParams) -> MatchingFactors:
    g, t, _ = _factors(energy, params)
    return MatchingFactors(complex(g), complex(t))


def matching_residual(energy, params: WellParams):
    """``(g+1)(t+1) exp(-i p2 d) + (g-1)(t-1) exp(i p2 d)``; vectorised."""
    g, t, q2 = _factors(energy, params)
    theta = params.c * q2 * params.d
    out = (g + 1) * (t + 1) * np.exp(-1j * theta) + (g - 1) * (t - 1) * np.exp(1j * theta)
    return out if np.ndim(out) else complex(out)


def symmetric_residual(energy, params: WellParams):
    """Tangent-free symmetric-well condition ``(1+g^2) i sin(p2 d) - 2 g cos(p2 d)``.

    Equal to ``-g/2`` times :func:`matching_residual` when ``V1 = V2``.
    """
    if params.v1 != params.v2:
        raise ValueError("symmetric_residual needs v1 == v2")
    g, _, q2 = _factors(energy, params)
    theta = params.c * q2 * params.d
    out = (1 + g * g) * 1j * np.sin(theta) - 2 * g * np.cos(theta)
    return out if np.ndim(out) else complex(out)


# ---------------------------------------------------------------------------
# roots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResonanceSolution:
    energy: complex
    method: Method
    level_index: int
    fwhm_half: float | None = None

    @property
    def width(self) -> float:
        """``Gamma = 2 Im E``."""
        return 2.0 * self.energy.imag


class RootSearch(list):
    """List of converged solutions; ``unconverged`` holds failed seeds."""

    def __init__(self, items=(), unconverged=()):
        super().__init__(items)
        self.unconverged = list(unconverged)


def bound_window(params: WellParams) -> tuple[float, float]:
    """Energies where regions I and III are both evanescent."""
    return max(-1.0, params.v1 - params.v2 - 1.0), 1.0


def _number_levels(energies: Iterable[complex], method: Method, fwhm=None) -> list[ResonanceSolution]:
    """Level 1 is the highest; the list is returned in ascending energy."""
    energies = list(energies)
    pairs = sorted(zip(energies, fwhm or [None] * len(energies)), key=lambda ew: ew[0].real)
    n = len(pairs)
    return [ResonanceSolution(complex(e), method, n - i, w) for i, (e, w) in enumerate(pairs)]


def find_bound_states(params: WellParams, n_scan: int = SCAN_POINTS, xtol: float = 1e-13) -> list[ResonanceSolution]:
    """Real roots in the bound window, ascending, with level 1 the highest."""
    lo, hi = bound_window(params)
    if hi <= lo:
        return []
    grid = np.linspace(lo, hi, n_scan)[1:-1]
    f = _real_residual(grid, params)
    roots = []
    ok = np.isfinite(f)
    for i in range(len(grid) - 1):
        if not (ok[i] and ok[i + 1]):
            continue
        if f[i] == 0.0:
            roots.append(grid[i])
        elif f[i] * f[i + 1] < 0:
            roots.append(optimize.brentq(lambda e: _real_residual(e, params), grid[i], grid[i + 1], xtol=xtol))
    return _number_levels(roots, Method.REAL_ROOT)


def _real_residual(e, params):
    # on the bound window the residual is real
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.real(matching_residual(e, params))


def newton_root(f: Callable[[complex], complex], seed: complex, tol: float = NEWTON_TOL,
                max_iter: int = NEWTON_MAX_ITER) -> complex | None:
    """Newton iteration with a central-difference derivative."""
    e = complex(seed)
    for _ in range(max_iter):
        h = 1e-7 * max(1.0, abs(e))
        df = (f(e + h) - f(e - h)) / (2 * h)
        if df == 0 or not np.isfinite(df):
            return None
        step = f(e) / df
        if not np.isfinite(step):
            return None
        e -= step
        if abs(step) < tol:
            return e
    return None


def find_resonances(params: WellParams, seeds: Sequence[complex] | None = None) -> RootSearch:
    """Complex roots of the matching residual reached by Newton from ``seeds``.

    Default seeds: bound states for a subcritical step, transmission peaks
    for a symmetric well, otherwise straight-line extrapolations of the
    subcritical levels. ``Im E`` is reported non-negative.
    """
    if seeds is None:
        if not params.step_supercritical:
            seeds = [s.energy for s in find_bound_states(params)]
        elif params.symmetric:
            seeds = [pk.energy + 1j * pk.fwhm_half for pk in transmission_peaks(params)]
        else:
            seeds = [extrapolate_level(fit, params.v1) + 1e-3j for fit in fit_all_levels(params)]

    def f(e):
        return matching_residual(e, params)

    found, failed = [], []
    for seed in seeds:
        r = newton_root(f, seed)
        if r is None:
            failed.append(complex(seed))
            continue
        r = complex(r.real, abs(r.imag))
        if abs(r.imag) < NEWTON_TOL:
            r = complex(r.real, 0.0)
        if all(abs(r - q) > DEDUP_TOL for q in found):
            found.append(r)
    method = Method.CONTINUATION if params.step_supercritical else Method.REAL_ROOT
    return RootSearch(_number_levels(found, method), failed)


# ---------------------------------------------------------------------------
# symmetric well: transmission
# ---------------------------------------------------------------------------


class TransmissionPeak(NamedTuple):
    energy: float
    fwhm_half: float
    height: float
    partial: bool


def transmission_coefficient(energy, params: WellParams):
    """Transmission through the symmetric sharp well (``V1 = V2``)."""
    if params.v1 != params.v2:
        raise ValueError("the transmission formula needs a symmetric well (v1 == v2)")
    e = np.asarray(energy, dtype=float)
    if np.any(np.abs(e) <= 1):
        raise ValueError("exterior region is evanescent for |E| <= c^2; no transmission")
    g, _, q2 = _factors(e, params)
    s = np.sin(params.c * q2 * params.d)
    t = 1.0 / (1.0 + ((1 - g * g) / (2 * g)) ** 2 * s * s)
    t = np.real(t)
    return t if np.ndim(t) else float(t)


def transmission_solutions(params: WellParams, window: tuple[float, float] | None = None) -> list[ResonanceSolution]:
    """Transmission maxima as resonance estimates carrying ``fwhm_half``."""
    peaks = [pk for pk in transmission_peaks(params, window) if not pk.partial]
    return _number_levels([complex(pk.energy) for pk in peaks], Method.TRANSMISSION,
                          [pk.fwhm_half for pk in peaks])


def symmetric_window(params: WellParams) -> tuple[float, float]:
    """Overlap of the lower exterior continuum with the well's upper one."""
    return 1.0 - params.v2, -1.0


def peak_halfwidths(f: Callable[[float], float], x_peak: float, level: float,
                    lo: float, hi: float) -> tuple[float | None, float | None]:
    """Where ``f`` falls to ``level`` on each side of ``x_peak`` inside
    ``[lo, hi]``; ``None`` for a side without a crossing."""
    out = []
    for a, b in ((lo, x_peak), (x_peak, hi)):
        fa, fb = f(a) - level, f(b) - level
        if fa * fb > 0:
            # shrink toward the peak until a crossing appears
            xs = np.linspace(a, b, 2001)
            vals = np.array([f(x) for x in xs]) - level
            idx = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
            if len(idx) == 0:
                out.append(None)
                continue
            k = idx[-1] if b == x_peak else idx[0]
            a, b = xs[k], xs[k + 1]
        out.append(optimize.brentq(lambda x: f(x) - level, a, b, xtol=1e-15, rtol=1e-14))
    return out[0], out[1]


def transmission_peaks(params: WellParams, window: tuple[float, float] | None = None,
                       n_scan: int = SCAN_POINTS) -> list[TransmissionPeak]:
    """Maxima of T with their half widths at half maximum (``T_peak/2``)."""
    lo, hi = window or symmetric_window(params)
    eps = 1e-9
    xs = np.linspace(lo + eps, hi - eps, n_scan)

    def T(x):
        return transmission_coefficient(x, params)

    ts = T(xs)
    peaks = []
    for i in range(1, len(xs) - 1):
        if not (ts[i] > ts[i - 1] and ts[i] >= ts[i + 1]):
            continue
        res = optimize.minimize_scalar(lambda x: -T(x), bracket=(xs[i - 1], xs[i], xs[i + 1]),
                                       method="golden", tol=1e-12)
        x_pk, t_pk = float(res.x), float(-res.fun)
        # bound each side by the neighbouring minimum so crossings belong to this peak
        a, b = i, i
        while a > 0 and ts[a - 1] < ts[a]:
            a -= 1
        while b < len(xs) - 1 and ts[b + 1] < ts[b]:
            b += 1
        a, b = xs[a], xs[b]
        l, r = peak_halfwidths(T, x_pk, 0.5 * t_pk, a, b)
        partial = l is None or r is None or i in (1, len(xs) - 2)
        half = 0.5 * (r - l) if not (l is None or r is None) else float("nan")
        peaks.append(TransmissionPeak(x_pk, half, t_pk, partial))
    return peaks


# ---------------------------------------------------------------------------
# fits of subcritical levels against the step height
# ---------------------------------------------------------------------------


def default_v1_samples() -> np.ndarray:
    """V1 = 1.01 .. 1.99 (c^2) in steps of 0.01."""
    return np.round(np.arange(101, 200) / 100.0, 10)


@dataclass(frozen=True)
class FitResult:
    level_index: int
    intercept: float
    slope: float
    correlation: float
    v1_range: tuple[float, float]
    n_samples: int
    residual_rms: float


def _track_level(level_index: int, template: WellParams, v1_samples) -> np.ndarray:
    energies = []
    for v1 in v1_samples:
        levels = find_bound_states(template.with_heights(float(v1)))
        match = [s for s in levels if s.level_index == level_index]
        if not match:
            raise ValueError(f"level {level_index} does not exist at V1 = {v1:g} c^2")
        energies.append(match[0].energy.real)
    return np.array(energies)


def fit_energy_vs_height(level_index: int, params_template: WellParams,
                         v1_samples: Sequence[float] | None = None) -> FitResult:
    """Ordinary least squares ``E = a + b V1`` over subcritical step heights."""
    v1 = np.asarray(default_v1_samples() if v1_samples is None else v1_samples, dtype=float)
    if len(v1) < 10:
        raise ValueError("need at least 10 V1 samples")
    if np.any((v1 <= 1.0) | (v1 >= 2.0)):
        raise ValueError("V1 samples must lie strictly between c^2 and 2c^2")
    e = _track_level(level_index, params_template, v1)
    return fit_line(level_index, v1, e)


def fit_line(level_index: int, v1: np.ndarray, e: np.ndarray) -> FitResult:
    res = stats.linregress(v1, e)
    rms = float(np.sqrt(np.mean((e - (res.intercept + res.slope * v1)) ** 2)))
    return FitResult(level_index, float(res.intercept), float(res.slope), float(res.rvalue),
                     (float(v1.min()), float(v1.max())), len(v1), rms)


def fit_all_levels(params_template: WellParams, v1_samples: Sequence[float] | None = None) -> list[FitResult]:
    """Fits for every level present across all samples, level 1 first."""
    v1 = np.asarray(default_v1_samples() if v1_samples is None else v1_samples, dtype=float)
    per_sample = [find_bound_states(params_template.with_heights(float(x))) for x in v1]
    n_levels = min(len(s) for s in per_sample)
    fits = []
    for k in range(1, n_levels + 1):
        e = np.array([[s.energy.real for s in lv if s.level_index == k][0] for lv in per_sample])
        fits.append(fit_line(k, v1, e))
    return fits


def extrapolate_level(fit: FitResult, v1: float) -> float:
    return fit.intercept + fit.slope * v1


# ---------------------------------------------------------------------------
# level tables
# ---------------------------------------------------------------------------


def relative_error_percent(value: float, reference: float) -> float:
    return abs(value - reference) / abs(reference) * 100.0


def write_level_table(path, rows: Sequence[dict], comments: Sequence[str] = ()) -> Path:
    path = Path(path)
    if not rows:
        raise ValueError("empty level table")
    header = list(rows[0])
    with path.open("w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.DictWriter(fh, fieldnames=header)
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return path
