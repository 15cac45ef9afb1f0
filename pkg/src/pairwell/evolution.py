"""Strang split-operator evolution of free basis states and Bogoliubov snapshots.

States are carried as plane-wave coefficient arrays of shape
``(2, n_states, n_z)`` in FFT momentum order. One step is
``K(dt/2) V(dt) K(dt/2)`` with the kinetic factor applied exactly per
momentum and the potential phase ``exp(-i U dt)`` applied in position space.
Consecutive half kinetic steps are merged into full ones.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .dirac_core import (
    Branch,
    GridSpec,
    SpinorField,
    WellParams,
    box_potential,
    free_energy,
    free_spinors,
    from_momentum,
    kinetic_step_factor,
    light_cone_time,
    to_momentum,
)

DEFAULT_DT = 1.0e-6
PHASE_GUARD = 0.2  # max radians per step
DEFAULT_MEMORY_BUDGET = 2 * 1024**3

SNAPSHOT_MAGIC = b"PWU1"
_HEADER = struct.Struct("<4sIdI")
BLOCK_NAMES = ("u_pp", "u_pn", "u_np", "u_nn")
_BLOCK_BITS = {"u_pp": 1, "u_pn": 2, "u_np": 4, "u_nn": 8}


class EvolutionError(ValueError):
    """A propagation request that violates an accuracy or causality guard."""


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float
    n_steps: int
    snapshot_times: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ValueError("n_steps must be a non-negative integer")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        # no explicit snapshots: report the final state only
        times = tuple(float(t) for t in self.snapshot_times) or (self.n_steps * self.dt,)
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot_times must be sorted")
        for t in times:
            k = round(t / self.dt)
            if abs(k * self.dt - t) > 1e-6 * self.dt:
                raise ValueError(f"snapshot time {t} is not a multiple of dt={self.dt}")
            if not 0 <= k <= self.n_steps:
                raise ValueError(f"snapshot time {t} outside [0, n_steps*dt]")
        object.__setattr__(self, "snapshot_times", times)

    @property
    def t_total(self) -> float:
        return self.n_steps * self.dt

    @property
    def snapshot_steps(self) -> tuple[int, ...]:
        return tuple(int(round(t / self.dt)) for t in self.snapshot_times)

    @classmethod
    def uniform(cls, dt: float, t_end: float, n_snapshots: int = 1) -> "PropagatorConfig":
        """``n_snapshots`` equally spaced snapshots ending at ``t_end`` (plus t=0
        when ``n_snapshots > 1``)."""
        n_steps = int(round(t_end / dt))
        if n_snapshots <= 1:
            steps = [n_steps]
        else:
            steps = sorted({int(round(k * n_steps / (n_snapshots - 1))) for k in range(n_snapshots)})
        return cls(dt, n_steps, tuple(s * dt for s in steps))


def max_phase_rate(grid: GridSpec, params: WellParams) -> float:
    """Upper bound on |E| over the represented spectrum (atomic units)."""
    e_kin = float(free_energy(np.abs(grid.momenta).max(), params.c))
    return e_kin + float(np.abs(box_potential(grid, params)).max())


def check_guards(grid: GridSpec, params: WellParams, cfg: PropagatorConfig) -> None:
    phase = cfg.dt * max_phase_rate(grid, params)
    if phase >= PHASE_GUARD:
        raise EvolutionError(
            f"dt={cfg.dt:g} gives {phase:.3f} rad per step (limit {PHASE_GUARD}); "
            f"use dt < {PHASE_GUARD / max_phase_rate(grid, params):.3g}"
        )
    t_max = light_cone_time(grid, params.c)
    if cfg.t_total >= t_max:
        raise EvolutionError(
            f"t_total={cfg.t_total:g} violates the light-cone guard c*t < L/4 "
            f"(t < {t_max:.6g} for L={grid.box_length:g})"
        )


def _fft_workers(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("PAIRWELL_THREADS", "1") or 1)
    return max(1, int(threads))


class SplitOperator:
    """Precomputed factors for one (grid, well, dt) triple."""

    def __init__(self, grid: GridSpec, params: WellParams, dt: float, threads: int | None = None):
        self.grid = grid
        self.params = params
        self.dt = dt
        self.workers = _fft_workers(threads)
        _kernels.set_threads(self.workers)
        p = grid.fft_momenta
        self.phase = np.exp(-1j * dt * box_potential(grid, params, fft_order=True))
        self.half = self._split(kinetic_step_factor(p, 0.5 * dt, params.c))
        self.full = self._split(kinetic_step_factor(p, dt, params.c))
        self.chi_pos, self.chi_neg = (np.ascontiguousarray(x) for x in free_spinors(p, params.c))

    @staticmethod
    def _split(m):
        return tuple(np.ascontiguousarray(m[:, i, j]) for i in (0, 1) for j in (0, 1))

    def _potential(self, a: np.ndarray) -> np.ndarray:
        y = sfft.ifft(a, axis=-1, overwrite_x=True, workers=self.workers)
        _kernels.apply_phase(y, self.phase)
        return sfft.fft(y, axis=-1, overwrite_x=True, workers=self.workers)

    def advance(self, a: np.ndarray, n_steps: int) -> np.ndarray:
        """Apply ``n_steps`` Strang steps to coefficients ``a``; returns the
        result (``a`` itself may be overwritten)."""
        if n_steps == 0:
            return a
        _kernels.apply_spinor_matrix(a, *self.half)
        for s in range(n_steps):
            a = self._potential(a)
            _kernels.apply_spinor_matrix(a, *(self.full if s < n_steps - 1 else self.half))
        return a

    def initial_states(self, branches: Iterable[Branch]) -> np.ndarray:
        """Free basis states, natural momentum order within each branch."""
        n = self.grid.n_z
        branches = list(branches)
        a = np.zeros((2, n * len(branches), n), dtype=complex)
        cols = np.fft.ifftshift(np.arange(n))  # natural index k -> fft index
        for i, br in enumerate(branches):
            chi = self.chi_pos if br is Branch.POSITIVE else self.chi_neg
            rows = i * n + np.arange(n)
            a[:, rows, cols] = chi[:, cols]
        return a


def propagate(
    field: SpinorField, params: WellParams, cfg: PropagatorConfig, threads: int | None = None
) -> SpinorField:
    """Evolve one field for ``cfg.n_steps`` steps of ``cfg.dt``."""
    check_guards(field.grid, params, cfg)
    op = SplitOperator(field.grid, params, cfg.dt, threads)
    a = np.ascontiguousarray(to_momentum(field)[:, None, :])
    a = op.advance(a, cfg.n_steps)
    return from_momentum(a[:, 0, :], field.grid)


@dataclass
class BogoliubovMatrix:
    """Overlaps ``<free state | evolved free state>`` at one time.

    Row and column indices run over lattice momenta in ascending order. The
    first letter of a block names the projection branch, the second the
    branch of the evolved initial state (``u_pn[p, n] = <u_p|v_n(t)>``).
    Blocks of branches that were not evolved are ``None``.
    """

    time: float
    n_z: int
    u_pp: np.ndarray | None = None
    u_pn: np.ndarray | None = None
    u_np: np.ndarray | None = None
    u_nn: np.ndarray | None = None

    @classmethod
    def identity(cls, n_z: int, branches=(Branch.NEGATIVE, Branch.POSITIVE)) -> "BogoliubovMatrix":
        eye, zero = np.eye(n_z, dtype=complex), np.zeros((n_z, n_z), dtype=complex)
        m = cls(0.0, n_z)
        if Branch.POSITIVE in branches:
            m.u_pp, m.u_np = eye.copy(), zero.copy()
        if Branch.NEGATIVE in branches:
            m.u_pn, m.u_nn = zero.copy(), eye.copy()
        return m

    def blocks(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in BLOCK_NAMES if getattr(self, k) is not None}

    @property
    def mask(self) -> int:
        return sum(_BLOCK_BITS[k] for k in self.blocks())

    @property
    def has_positive(self) -> bool:
        return self.u_pp is not None and self.u_np is not None

    @property
    def has_negative(self) -> bool:
        return self.u_pn is not None and self.u_nn is not None

    def full(self) -> np.ndarray:
        """The ``2 n_z`` square block matrix ``[[u_pp, u_pn], [u_np, u_nn]]``."""
        if not (self.has_positive and self.has_negative):
            raise ValueError("both branches are needed for the full matrix")
        return np.block([[self.u_pp, self.u_pn], [self.u_np, self.u_nn]])

    def column_norms(self) -> np.ndarray:
        """Squared norms of the available columns (positive branch first)."""
        out = []
        if self.has_positive:
            out.append(_sq(self.u_pp).sum(axis=0) + _sq(self.u_np).sum(axis=0))
        if self.has_negative:
            out.append(_sq(self.u_pn).sum(axis=0) + _sq(self.u_nn).sum(axis=0))
        return np.concatenate(out) if out else np.empty(0)


def _sq(x):
    return x.real**2 + x.imag**2


@dataclass(frozen=True)
class Occupations:
    """Per-momentum particle numbers without the full blocks.

    ``electron[p] = sum_n |u_pn|^2`` and ``positron[n] = sum_p |u_np|^2``,
    ascending momentum order; ``None`` when the branch was not evolved.
    """

    time: float
    n_z: int
    electron: np.ndarray | None
    positron: np.ndarray | None


def _branches(branches) -> list[Branch]:
    out = []
    for b in branches:
        b = Branch(b)
        if b not in out:
            out.append(b)
    if not out:
        raise ValueError("at least one branch must be evolved")
    # fixed order keeps runs bit-identical regardless of how branches were listed
    return sorted(out, key=lambda b: b is Branch.POSITIVE)


def _run(grid, params, cfg, branches, threads):
    check_guards(grid, params, cfg)
    branches = _branches(branches)
    op = SplitOperator(grid, params, cfg.dt, threads)
    a = op.initial_states(branches)
    done = 0
    for t, k in zip(cfg.snapshot_times, cfg.snapshot_steps):
        a = op.advance(a, k - done)
        done = k
        yield t, op, a, branches


def iter_bogoliubov(
    grid: GridSpec,
    params: WellParams,
    cfg: PropagatorConfig,
    branches=(Branch.NEGATIVE,),
    threads: int | None = None,
) -> Iterator[BogoliubovMatrix]:
    """Yield a :class:`BogoliubovMatrix` at each snapshot time, in order."""
    n = grid.n_z
    for t, op, a, brs in _run(grid, params, cfg, branches, threads):
        pos, neg = _kernels.project(a, op.chi_pos, op.chi_neg)
        snap = BogoliubovMatrix(t, n)
        for i, br in enumerate(brs):
            rows = slice(i * n, (i + 1) * n)
            # (initial state, fft momentum) -> (projected momentum, initial state)
            up = np.ascontiguousarray(np.fft.fftshift(pos[rows], axes=-1).T)
            dn = np.ascontiguousarray(np.fft.fftshift(neg[rows], axes=-1).T)
            if br is Branch.NEGATIVE:
                snap.u_pn, snap.u_nn = up, dn
            else:
                snap.u_pp, snap.u_np = up, dn
        yield snap


def iter_occupations(
    grid: GridSpec,
    params: WellParams,
    cfg: PropagatorConfig,
    branches=(Branch.POSITIVE,),
    threads: int | None = None,
) -> Iterator[Occupations]:
    """Like :func:`iter_bogoliubov` but reduces each snapshot to the
    per-momentum particle numbers straight from the evolved states."""
    n = grid.n_z
    for t, op, a, brs in _run(grid, params, cfg, branches, threads):
        electron = positron = None
        for i, br in enumerate(brs):
            sub = np.ascontiguousarray(a[:, i * n : (i + 1) * n, :])
            w_pos, w_neg = _kernels.branch_weights(sub, op.chi_pos, op.chi_neg)
            if br is Branch.NEGATIVE:
                electron = np.fft.fftshift(w_pos)
            else:
                positron = np.fft.fftshift(w_neg)
        yield Occupations(t, n, electron, positron)


def bogoliubov_evolution(
    grid: GridSpec,
    params: WellParams,
    cfg: PropagatorConfig,
    branches=(Branch.NEGATIVE,),
    threads: int | None = None,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
    spill_dir: str | os.PathLike | None = None,
) -> list[BogoliubovMatrix]:
    """All snapshots as a list. When they would exceed ``memory_budget``
    bytes they are written to PWU1 files in ``spill_dir`` and returned as
    read-only memory maps."""
    n_blocks = 2 * len(_branches(branches))
    needed = len(cfg.snapshot_times) * n_blocks * grid.n_z**2 * 16
    spill = needed > memory_budget
    if spill and spill_dir is None:
        spill_dir = tempfile.mkdtemp(prefix="pairwell-")
    out = []
    for i, snap in enumerate(iter_bogoliubov(grid, params, cfg, branches, threads)):
        if spill:
            path = Path(spill_dir) / f"snapshot_{i:05d}.pwu"
            write_snapshot(path, snap)
            snap = read_snapshot(path, mmap=True)
        out.append(snap)
    return out


def write_snapshot(path: str | os.PathLike, snap: BogoliubovMatrix) -> None:
    """Little-endian: magic, n_z (u32), time (f64), block mask (u32), then the
    present blocks as row-major complex128 in the order u_pp, u_pn, u_np, u_nn."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, snap.n_z, snap.time, snap.mask))
        for block in snap.blocks().values():
            fh.write(np.ascontiguousarray(block, dtype="<c16").tobytes())


def read_snapshot(path: str | os.PathLike, mmap: bool = False) -> BogoliubovMatrix:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, n_z, time, mask = _HEADER.unpack(head)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    names = [k for k in BLOCK_NAMES if mask & _BLOCK_BITS[k]]
    size = n_z * n_z
    expected = _HEADER.size + 16 * size * len(names)
    if os.path.getsize(path) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {os.path.getsize(path)}")
    snap = BogoliubovMatrix(time, n_z)
    for i, name in enumerate(names):
        offset = _HEADER.size + 16 * size * i
        if mmap:
            block = np.memmap(path, dtype="<c16", mode="r", offset=offset, shape=(n_z, n_z))
        else:
            block = np.fromfile(path, dtype="<c16", count=size, offset=offset).reshape(n_z, n_z)
        setattr(snap, name, block)
    return snap
