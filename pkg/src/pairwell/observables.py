"""Particle numbers, densities, energy spectra and growth rates from
Bogoliubov snapshots.

Every reduction accepts either a full :class:`BogoliubovMatrix` or the
lighter :class:`Occupations` produced by ``iter_occupations``.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .dirac_core import C_LIGHT, GridSpec, WellParams, free_energy, free_spinors
from .evolution import BogoliubovMatrix, Occupations

MIN_FIT_SAMPLES = 10


class Species(str, Enum):
    ELECTRON = "electron"
    POSITRON = "positron"


@dataclass(frozen=True)
class SpectrumSeries:
    """Energy distribution on the folded lattice energies.

    ``energies`` are ``E/c^2`` for ``|p| = 0, dp, .., (n_z/2) dp``;
    ``values`` is ``N(E)`` per unit ``E/c^2`` so that its trapezoid integral
    over ``energies`` approximates the particle number; ``counts`` holds the
    exact particle number in each bin (both momentum signs).
    """

    species: Species
    energies: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    time: float

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.energies))


@dataclass(frozen=True)
class NumberSeries:
    times: np.ndarray
    electron: np.ndarray
    positron: np.ndarray
    cc: np.ndarray | None = None
    bc: np.ndarray | None = None

    def column(self, name: str) -> np.ndarray:
        col = getattr(self, name)
        if col is None:
            raise ValueError(f"series has no {name!r} column")
        return col


@dataclass(frozen=True)
class Partition:
    threshold: float  # E*/c^2
    cc_count: float
    bc_count: float
    cc: SpectrumSeries | None
    bc: SpectrumSeries
    cc_empty: bool


@dataclass(frozen=True)
class Peak:
    energy: float
    height: float


def _sq(x):
    return x.real**2 + x.imag**2


def momentum_distribution(snapshot, species: Species) -> np.ndarray:
    """``N(p)`` in ascending momentum order."""
    species = Species(species)
    if isinstance(snapshot, Occupations):
        out = snapshot.electron if species is Species.ELECTRON else snapshot.positron
    elif species is Species.ELECTRON:
        out = None if snapshot.u_pn is None else _sq(snapshot.u_pn).sum(axis=1)
    else:
        out = None if snapshot.u_np is None else _sq(snapshot.u_np).sum(axis=1)
    if out is None:
        branch = "negative" if species is Species.ELECTRON else "positive"
        raise ValueError(f"{species.value} quantities need the {branch} branch evolved")
    return np.asarray(out, dtype=float)


def particle_numbers(snapshot) -> tuple[float, float]:
    """``(N_electron, N_positron)``; NaN for a species whose branch was not
    evolved."""
    out = []
    for sp in (Species.ELECTRON, Species.POSITRON):
        try:
            out.append(float(momentum_distribution(snapshot, sp).sum()))
        except ValueError:
            out.append(float("nan"))
    return out[0], out[1]


def electron_density(snapshot: BogoliubovMatrix, grid: GridSpec, c: float = C_LIGHT) -> np.ndarray:
    """``rho(z) = sum_n |sum_p u_pn u_p(z)|^2`` at ``grid.positions``."""
    if snapshot.u_pn is None:
        raise ValueError("electron density needs the u_pn block")
    chi_pos, _ = free_spinors(grid.momenta, c)
    # coefficients of each column in natural momentum order -> FFT order
    coeff = np.fft.ifftshift(chi_pos[:, None, :] * np.asarray(snapshot.u_pn).T[None, :, :], axes=-1)
    fields = np.fft.ifft(coeff, axis=-1) * (grid.n_z / np.sqrt(grid.box_length))
    rho = _sq(fields).sum(axis=(0, 1))
    return np.fft.fftshift(rho)


def _fold(grid: GridSpec, n_p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum ``N(p)`` over ``+-p``; returns (|p| lattice, counts)."""
    half = grid.n_z // 2
    counts = np.zeros(half + 1)
    counts[:half] += n_p[half:]  # p = 0 .. (half-1) dp
    counts[1:] += n_p[half - 1 :: -1]  # p = -dp .. -half dp
    return grid.dp * np.arange(half + 1), counts


def energy_spectrum(snapshot, species: Species, grid: GridSpec, c: float = C_LIGHT) -> SpectrumSeries:
    species = Species(species)
    p_abs, counts = _fold(grid, momentum_distribution(snapshot, species))
    energy = free_energy(p_abs, c)
    p_jac = p_abs.copy()
    p_jac[0] = p_abs[1]  # one-sided limit at p = 0
    dedp = c * c * p_jac / free_energy(p_jac, c)
    values = c * c * grid.box_length / (2 * np.pi * dedp) * counts
    return SpectrumSeries(species, energy / (c * c), values, counts, float(snapshot.time))


def find_peaks(spectrum: SpectrumSeries, window: tuple[float, float] | None = None,
               min_height: float = 0.0) -> list[Peak]:
    """Local maxima of ``values`` refined by the vertex of the parabola
    through the three surrounding (unevenly spaced) samples."""
    x, y = spectrum.energies, spectrum.values
    peaks = []
    for i in range(1, len(y) - 1):
        if not (y[i] > y[i - 1] and y[i] >= y[i + 1]) or y[i] <= min_height:
            continue
        xs, ys = x[i - 1 : i + 2], y[i - 1 : i + 2]
        a, b, c0 = np.polyfit(xs - xs[1], ys, 2)
        if a < 0:
            dx = -b / (2 * a)
            xp, yp = xs[1] + dx, c0 - b * b / (4 * a)
        else:
            xp, yp = xs[1], ys[1]
        if window is None or window[0] <= xp <= window[1]:
            peaks.append(Peak(float(xp), float(yp)))
    return peaks


def partition_threshold(params: WellParams) -> float:
    """``E*/c^2`` separating continuum-continuum from bound-continuum pairs."""
    if params.v2 == 0:
        return float("inf")
    return params.v1 - params.v2 - 1.0


def partition_spectrum(spectrum: SpectrumSeries, params: WellParams) -> Partition:
    """Hard threshold split: ``E <= E*`` is continuum-continuum."""
    threshold = partition_threshold(params)
    cc_empty = params.v2 > 0 and params.v1 - params.v2 <= 2.0
    is_cc = np.zeros_like(spectrum.energies, dtype=bool) if cc_empty else spectrum.energies <= threshold

    def part(mask):
        return SpectrumSeries(spectrum.species, spectrum.energies[mask], spectrum.values[mask],
                              spectrum.counts[mask], spectrum.time)

    cc = None if cc_empty else part(is_cc)
    bc = part(~is_cc)
    cc_count = 0.0 if cc is None else cc.total
    return Partition(threshold, cc_count, bc.total, cc, bc, cc_empty)


def number_series(snapshots: Iterable, params: WellParams, grid: GridSpec,
                  c: float = C_LIGHT) -> NumberSeries:
    """Counts per snapshot; the partition columns come from the positron
    spectrum when it is available."""
    t, ne, npos, cc, bc = [], [], [], [], []
    for snap in snapshots:
        e, p = particle_numbers(snap)
        t.append(snap.time)
        ne.append(e)
        npos.append(p)
        if np.isfinite(p):
            part = partition_spectrum(energy_spectrum(snap, Species.POSITRON, grid, c), params)
            cc.append(part.cc_count)
            bc.append(part.bc_count)
    have_parts = len(cc) == len(t)
    return NumberSeries(np.array(t), np.array(ne), np.array(npos),
                        np.array(cc) if have_parts else None, np.array(bc) if have_parts else None)


def growth_rate(series: NumberSeries, window: tuple[float, float], column: str = "positron") -> float:
    """Least-squares slope of ``column`` against time inside ``window``."""
    t = series.times
    y = series.column(column)
    mask = (t >= window[0]) & (t <= window[1])
    if window[0] < t.min() or window[1] > t.max():
        raise ValueError(f"window {window} outside series range [{t.min()}, {t.max()}]")
    if mask.sum() < MIN_FIT_SAMPLES:
        raise ValueError(f"window {window} holds {mask.sum()} samples, need {MIN_FIT_SAMPLES}")
    return float(stats.linregress(t[mask], y[mask]).slope)


# CSV output -----------------------------------------------------------------

PARTITION_NOTE = "cc/bc split by hard threshold E* = V1 - V2 - 1 (c^2 units); reconstruction, not a measured assignment"


def provenance_lines(grid: GridSpec | None, params: WellParams, extra: dict | None = None) -> list[str]:
    items = {f"well.{k}": v for k, v in asdict(params).items()}
    if grid is not None:
        items.update({"grid.n_z": grid.n_z, "grid.box_length": grid.box_length})
    items.update(extra or {})
    return [f"# {k} = {v!r}" for k, v in items.items()]


def _write(path, header: Sequence[str], columns: Sequence[np.ndarray], comments: list[str]):
    path = Path(path)
    with path.open("w", newline="") as fh:
        for line in comments:
            fh.write(line + "\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([repr(float(v)) for v in row])
    return path


def write_spectrum_csv(path, spectrum: SpectrumSeries, grid: GridSpec, params: WellParams):
    comments = provenance_lines(grid, params, {"species": spectrum.species.value, "time": spectrum.time})
    return _write(path, ["E_over_c2", "N_E"], [spectrum.energies, spectrum.values], comments)


def write_numbers_csv(path, series: NumberSeries, grid: GridSpec, params: WellParams):
    nan = np.full_like(series.times, np.nan)
    cols = [series.times, series.electron, series.positron,
            nan if series.cc is None else series.cc, nan if series.bc is None else series.bc]
    comments = provenance_lines(grid, params, {"partition": PARTITION_NOTE})
    return _write(path, ["t", "N_e", "N_pos", "N_cc", "N_bc"], cols, comments)


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    header, data = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    return {h: data[:, i] for i, h in enumerate(header)}
