"""Independent reference implementations used only by the tests."""

import numpy as np

from pairwell.dirac_core import C_LIGHT, GridSpec, free_energy


def dense_position_hamiltonian(grid: GridSpec, potential: np.ndarray, c: float = C_LIGHT) -> np.ndarray:
    """Lattice Hamiltonian on the ``2 n_z`` position-space amplitudes
    (component 0 block first), momentum operator applied spectrally."""
    n = grid.n_z
    eye = np.eye(n)
    dft = np.fft.fft(eye, axis=0)
    # p acting on samples in natural order; the fft phase convention cancels
    p_op = np.fft.ifft(grid.fft_momenta[:, None] * dft, axis=0)
    h = np.block([
        [c * c * eye + np.diag(potential), c * p_op],
        [c * p_op, -c * c * eye + np.diag(potential)],
    ])
    return 0.5 * (h + h.conj().T)


def dense_evolve(h: np.ndarray, vec: np.ndarray, t: float) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return v @ (np.exp(-1j * w * t) * (v.conj().T @ vec))


def dense_plane_wave_hamiltonian(grid: GridSpec, potential_fft_order: np.ndarray, c: float = C_LIGHT):
    """Hamiltonian in the free spinor basis, blocks ordered [positive, negative]
    and momenta in FFT order. Returns (H, p)."""
    n = grid.n_z
    p = grid.fft_momenta
    e = free_energy(p, c)
    norm = np.sqrt(2 * e * (e + c * c))
    chi = [np.stack([(e + c * c) / norm, c * p / norm]), np.stack([-c * p / norm, (e + c * c) / norm])]
    uhat = np.fft.fft(potential_fft_order) / n
    m = uhat[(np.arange(n)[:, None] - np.arange(n)[None, :]) % n]
    h = np.zeros((2 * n, 2 * n), dtype=complex)
    for a in range(2):
        for b in range(2):
            ov = chi[a][0][:, None] * chi[b][0][None, :] + chi[a][1][:, None] * chi[b][1][None, :]
            h[a * n:(a + 1) * n, b * n:(b + 1) * n] = m * ov
    h[np.arange(n), np.arange(n)] += e
    h[n + np.arange(n), n + np.arange(n)] -= e
    return 0.5 * (h + h.conj().T), p


def dense_bogoliubov(grid: GridSpec, potential_fft_order: np.ndarray, times, c: float = C_LIGHT):
    """Exact ``U(t)`` in the free basis, natural momentum order, as
    dicts of blocks ``u_pp, u_pn, u_np, u_nn``."""
    h, _ = dense_plane_wave_hamiltonian(grid, potential_fft_order, c)
    w, v = np.linalg.eigh(h)
    n = grid.n_z
    order = np.fft.fftshift(np.arange(n))  # natural index -> fft index
    out = []
    for t in times:
        u = (v * np.exp(-1j * w * t)) @ v.conj().T
        blocks = {
            "u_pp": u[:n, :n], "u_pn": u[:n, n:], "u_np": u[n:, :n], "u_nn": u[n:, n:],
        }
        out.append({k: b[np.ix_(order, order)] for k, b in blocks.items()})
    return out


def lorentzian(x, x0, half_width, height=1.0):
    return height / (1.0 + ((x - x0) / half_width) ** 2)
