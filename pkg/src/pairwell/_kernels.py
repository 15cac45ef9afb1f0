"""Hot loops of the split-operator propagator.

Each kernel exists twice: a numba ``@njit`` version and a plain numpy version
with identical semantics. The numba path is used when numba imports and the
environment variable ``PAIRWELL_DISABLE_NUMBA`` is unset (or ``0``).

Batched spinor arrays have shape ``(2, n_states, n_z)``: spinor component
first, then the state index, then the lattice index (FFT ordering). Keeping
the lattice axis last and contiguous lets the FFT run over rows in place.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("PAIRWELL_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("numba disabled by PAIRWELL_DISABLE_NUMBA")
    import numba
    from numba import njit, prange

    # the bundled TBB is often too old; prefer OpenMP without probing it
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

    NUMBA_AVAILABLE = True
except ImportError:
    numba = None
    NUMBA_AVAILABLE = False


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------

def _apply_spinor_matrix_numpy(psi, m00, m01, m10, m11):
    a0 = psi[0].copy()
    psi[0] *= m00
    psi[0] += m01 * psi[1]
    psi[1] *= m11
    psi[1] += m10 * a0


def _apply_phase_numpy(psi, phase):
    psi *= phase


def _project_numpy(psi, chi_pos, chi_neg):
    pos = chi_pos[0] * psi[0] + chi_pos[1] * psi[1]
    neg = chi_neg[0] * psi[0] + chi_neg[1] * psi[1]
    return pos, neg


def _branch_weights_numpy(psi, chi_pos, chi_neg):
    pos, neg = _project_numpy(psi, chi_pos, chi_neg)
    w_pos = (pos.real**2 + pos.imag**2).sum(axis=0)
    w_neg = (neg.real**2 + neg.imag**2).sum(axis=0)
    return w_pos, w_neg


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if NUMBA_AVAILABLE:

    @njit(parallel=True, cache=True)
    def _apply_spinor_matrix_numba(psi, m00, m01, m10, m11):
        n_states = psi.shape[1]
        n_z = psi.shape[2]
        for b in prange(n_states):
            for j in range(n_z):
                a0 = psi[0, b, j]
                a1 = psi[1, b, j]
                psi[0, b, j] = m00[j] * a0 + m01[j] * a1
                psi[1, b, j] = m10[j] * a0 + m11[j] * a1

    @njit(parallel=True, cache=True)
    def _apply_phase_numba(psi, phase):
        n_states = psi.shape[1]
        n_z = psi.shape[2]
        for b in prange(n_states):
            # one component row at a time keeps the access contiguous
            for k in range(2):
                for j in range(n_z):
                    psi[k, b, j] *= phase[j]

    @njit(parallel=True, cache=True)
    def _project_numba(psi, chi_pos, chi_neg):
        n_states = psi.shape[1]
        n_z = psi.shape[2]
        pos = np.empty((n_states, n_z), dtype=np.complex128)
        neg = np.empty((n_states, n_z), dtype=np.complex128)
        for b in prange(n_states):
            for j in range(n_z):
                a0 = psi[0, b, j]
                a1 = psi[1, b, j]
                pos[b, j] = chi_pos[0, j] * a0 + chi_pos[1, j] * a1
                neg[b, j] = chi_neg[0, j] * a0 + chi_neg[1, j] * a1
        return pos, neg

    @njit(cache=True)
    def _branch_weights_numba(psi, chi_pos, chi_neg):
        # serial on purpose: fixed summation order over states
        n_states = psi.shape[1]
        n_z = psi.shape[2]
        w_pos = np.zeros(n_z)
        w_neg = np.zeros(n_z)
        for b in range(n_states):
            for j in range(n_z):
                a0 = psi[0, b, j]
                a1 = psi[1, b, j]
                u = chi_pos[0, j] * a0 + chi_pos[1, j] * a1
                v = chi_neg[0, j] * a0 + chi_neg[1, j] * a1
                w_pos[j] += u.real * u.real + u.imag * u.imag
                w_neg[j] += v.real * v.real + v.imag * v.imag
        return w_pos, w_neg


def backend() -> str:
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if NUMBA_AVAILABLE else "numpy"


def set_threads(n: int | None) -> None:
    if n is None or not NUMBA_AVAILABLE:
        return
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


if NUMBA_AVAILABLE:
    apply_spinor_matrix = _apply_spinor_matrix_numba
    apply_phase = _apply_phase_numba
    project = _project_numba
    branch_weights = _branch_weights_numba
else:
    apply_spinor_matrix = _apply_spinor_matrix_numpy
    apply_phase = _apply_phase_numpy
    project = _project_numpy
    branch_weights = _branch_weights_numpy
