"""Lattice, potentials and the free Dirac basis for the reduced 1-D Hamiltonian

    h(z) = c sigma_1 p + sigma_3 c^2 + U(z),

in atomic units. ``U`` is the electron potential energy (the Sauter well
below). Energies handed to :class:`WellParams` are in units of c^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

C_LIGHT = 137.035999

# Width of the smooth return ramp that closes the well periodically, as a
# fraction of the box length. It sits on the seam, outside the light cone.
RETURN_RAMP_FRACTION = 1.0 / 32.0


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Periodic lattice of ``n_z`` points on a box of length ``box_length``.

    Positions run from ``-L/2`` in steps of ``dz``; momenta are
    ``p_j = 2 pi j / L`` for ``j = -n_z/2 .. n_z/2 - 1``. Properties without
    a ``fft_`` prefix are in this natural (ascending) order.
    """

    n_z: int
    box_length: float

    def __post_init__(self):
        if not isinstance(self.n_z, (int, np.integer)) or isinstance(self.n_z, bool):
            raise TypeError("n_z must be an integer")
        if self.n_z < 2 or not _is_power_of_two(int(self.n_z)):
            raise ValueError(f"n_z must be an even power of two, got {self.n_z}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")
        object.__setattr__(self, "n_z", int(self.n_z))
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def dz(self) -> float:
        return self.box_length / self.n_z

    @property
    def dp(self) -> float:
        return 2.0 * np.pi / self.box_length

    @property
    def positions(self) -> np.ndarray:
        return -0.5 * self.box_length + self.dz * np.arange(self.n_z)

    @property
    def momentum_indices(self) -> np.ndarray:
        return np.arange(-self.n_z // 2, self.n_z // 2)

    @property
    def momenta(self) -> np.ndarray:
        return self.dp * self.momentum_indices

    @property
    def fft_positions(self) -> np.ndarray:
        return np.fft.fftfreq(self.n_z) * self.box_length

    @property
    def fft_momenta(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_z, self.dz)

    def fft_index(self, momentum_index: int) -> int:
        j = int(momentum_index)
        if not -self.n_z // 2 <= j < self.n_z // 2:
            raise ValueError(f"momentum index {j} not on the lattice")
        return j % self.n_z


@dataclass(frozen=True)
class WellParams:
    """Asymmetric Sauter well: a step of height ``v1`` at z = 0 and a well of
    depth ``v2`` over ``-d <= z <= 0``. ``v1``/``v2`` in units of c^2,
    ``w`` and ``d`` in atomic units; ``w = 0`` is the sharp-wall limit.
    """

    v1: float
    v2: float
    w: float
    d: float
    c: float = C_LIGHT

    def __post_init__(self):
        for name in ("v1", "v2", "w"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.d > 0:
            raise ValueError("d must be positive")
        if not self.c > 0:
            raise ValueError("c must be positive")

    @staticmethod
    def is_supercritical(height: float) -> bool:
        """Height in units of c^2."""
        return height > 2.0

    @staticmethod
    def is_subcritical(height: float) -> bool:
        return height < 2.0

    @property
    def step_supercritical(self) -> bool:
        return self.is_supercritical(self.v1)

    @property
    def well_subcritical(self) -> bool:
        return self.is_subcritical(self.v2)

    @property
    def symmetric(self) -> bool:
        return self.v1 == self.v2

    @property
    def c2(self) -> float:
        return self.c * self.c

    def sharp(self) -> "WellParams":
        return WellParams(self.v1, self.v2, 0.0, self.d, self.c)

    def with_heights(self, v1: float, v2: float | None = None) -> "WellParams":
        return WellParams(v1, self.v2 if v2 is None else v2, self.w, self.d, self.c)


class Branch(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class BasisLabel:
    momentum_index: int
    branch: Branch

    def momentum(self, grid: GridSpec) -> float:
        return grid.dp * self.momentum_index

    def energy(self, grid: GridSpec, c: float = C_LIGHT) -> float:
        e = float(free_energy(self.momentum(grid), c))
        return e if self.branch is Branch.POSITIVE else -e


def basis_labels(grid: GridSpec) -> list[BasisLabel]:
    """All ``2 n_z`` labels: positive branch first, ascending momentum."""
    return [
        BasisLabel(int(j), branch)
        for branch in (Branch.POSITIVE, Branch.NEGATIVE)
        for j in grid.momentum_indices
    ]


@dataclass(frozen=True)
class SpinorField:
    """Two-component field sampled at ``grid.positions``; ``values`` has
    shape ``(n_z, 2)``."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.complex128)
        if v.shape != (self.grid.n_z, 2):
            raise ValueError(f"expected values of shape {(self.grid.n_z, 2)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def inner(self, other: "SpinorField") -> complex:
        return complex(self.grid.dz * np.vdot(self.values, other.values))

    def norm(self) -> float:
        return float(np.sqrt(self.grid.dz * np.sum(np.abs(self.values) ** 2)))


def free_energy(p, c: float = C_LIGHT):
    p = np.asarray(p, dtype=float)
    return c * np.sqrt(c * c + p * p)


def free_spinors(p, c: float = C_LIGHT) -> tuple[np.ndarray, np.ndarray]:
    """Real eigenvectors of ``c sigma_1 p + sigma_3 c^2``.

    Returns ``(chi_pos, chi_neg)``, each of shape ``(2,) + p.shape``.
    """
    p = np.asarray(p, dtype=float)
    e = free_energy(p, c)
    norm = np.sqrt(2.0 * e * (e + c * c))
    chi_pos = np.stack([(e + c * c) / norm, c * p / norm])
    chi_neg = np.stack([-c * p / norm, (e + c * c) / norm])
    return chi_pos, chi_neg


def free_hamiltonian(p: float, c: float = C_LIGHT) -> np.ndarray:
    return np.array([[c * c, c * p], [c * p, -c * c]], dtype=complex)


def kinetic_step_factor(p, dt: float, c: float = C_LIGHT) -> np.ndarray:
    """Closed-form ``exp(-i h0(p) dt)``; shape ``p.shape + (2, 2)``."""
    p = np.asarray(p, dtype=float)
    e = free_energy(p, c)
    cos = np.cos(e * dt)
    sin_e = np.sin(e * dt) / e
    out = np.empty(p.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = cos - 1j * sin_e * c * c
    out[..., 1, 1] = cos + 1j * sin_e * c * c
    out[..., 0, 1] = -1j * sin_e * c * p
    out[..., 1, 0] = out[..., 0, 1]
    return out


def sauter_well_potential(z, params: WellParams):
    """Electron potential energy of the smooth asymmetric well (atomic units).

    ``v1/2 (1 + tanh(z/w)) - v2/2 (1 + tanh((z + d)/w))``: 0 far left,
    ``-v2`` inside the well, ``v1 - v2`` far right.
    """
    if params.w <= 0:
        raise ValueError("sharp walls (w = 0) cannot be sampled; use the analytic model")
    z = np.asarray(z, dtype=float)
    c2 = params.c2
    return 0.5 * params.v1 * c2 * (1.0 + np.tanh(z / params.w)) - 0.5 * params.v2 * c2 * (
        1.0 + np.tanh((z + params.d) / params.w)
    )


def return_ramp(z, grid: GridSpec, params: WellParams):
    """Smooth step of height ``-(v1 - v2)`` centred on the box seam.

    Added to the Sauter well it makes the sampled potential periodic without
    a discontinuity at +-L/2. Its field is far below critical, so it creates
    no pairs on the time scales allowed by the light-cone guard.
    """
    z = np.asarray(z, dtype=float)
    half = 0.5 * grid.box_length
    width = RETURN_RAMP_FRACTION * grid.box_length
    height = (params.v1 - params.v2) * params.c2
    right = 0.5 * (1.0 + np.tanh((z - half) / width))
    left = 0.5 * (1.0 + np.tanh((z + half) / width)) - 1.0
    return -height * np.where(z >= 0, right, left)


def box_potential(grid: GridSpec, params: WellParams, fft_order: bool = False) -> np.ndarray:
    """Periodic potential energy sampled on the lattice."""
    z = grid.fft_positions if fft_order else grid.positions
    return sauter_well_potential(z, params) + return_ramp(z, grid, params)


def light_cone_time(grid: GridSpec, c: float = C_LIGHT) -> float:
    """Largest evolution time with ``c t < L/4``."""
    return grid.box_length / (4.0 * c)


def free_eigenstate(label: BasisLabel, grid: GridSpec, c: float = C_LIGHT) -> SpinorField:
    p = label.momentum(grid)
    grid.fft_index(label.momentum_index)
    chi_pos, chi_neg = free_spinors(p, c)
    chi = chi_pos if label.branch is Branch.POSITIVE else chi_neg
    wave = np.exp(1j * p * grid.positions) / np.sqrt(grid.box_length)
    return SpinorField(grid, wave[:, None] * chi[None, :])


# Plane-wave coefficients ---------------------------------------------------
#
# A field is psi(z) = sum_j a_j exp(i p_j z) / sqrt(L). With psi sampled in
# natural order, a = dz/sqrt(L) * fft(ifftshift(psi)) in FFT momentum order.


def to_momentum(field: SpinorField) -> np.ndarray:
    """Plane-wave coefficients, shape ``(2, n_z)`` in FFT momentum order."""
    g = field.grid
    y = np.fft.ifftshift(field.values, axes=0).T
    return np.fft.fft(y, axis=-1) * (g.dz / np.sqrt(g.box_length))


def from_momentum(coeffs: np.ndarray, grid: GridSpec) -> SpinorField:
    y = np.fft.ifft(np.asarray(coeffs), axis=-1) * (np.sqrt(grid.box_length) / grid.dz)
    return SpinorField(grid, np.fft.fftshift(y.T, axes=0))


def basis_amplitudes(field: SpinorField, c: float = C_LIGHT) -> tuple[np.ndarray, np.ndarray]:
    """``(<u_p|psi>, <v_p|psi>)`` over the lattice, natural momentum order."""
    a = to_momentum(field)
    chi_pos, chi_neg = free_spinors(field.grid.fft_momenta, c)
    pos = np.sum(chi_pos * a, axis=0)
    neg = np.sum(chi_neg * a, axis=0)
    return np.fft.fftshift(pos), np.fft.fftshift(neg)
