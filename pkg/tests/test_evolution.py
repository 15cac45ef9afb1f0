import numpy as np
import pytest

from .oracles import dense_bogoliubov, dense_evolve, dense_position_hamiltonian
from pairwell.dirac_core import (
    C_LIGHT,
    BasisLabel,
    Branch,
    GridSpec,
    SpinorField,
    WellParams,
    box_potential,
    free_eigenstate,
)
from pairwell.evolution import (
    BogoliubovMatrix,
    EvolutionError,
    PropagatorConfig,
    bogoliubov_evolution,
    check_guards,
    iter_bogoliubov,
    iter_occupations,
    propagate,
    read_snapshot,
    write_snapshot,
)

C = C_LIGHT
WELL = WellParams(2.5, 0.25, 0.3 / C, 0.2)
FREE = WellParams(0.0, 0.0, 0.3 / C, 0.2)


def _random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(grid.n_z, 2)) + 1j * rng.normal(size=(grid.n_z, 2))
    f = SpinorField(grid, v)
    return SpinorField(grid, v / f.norm())


def test_config_validation():
    with pytest.raises(ValueError):
        PropagatorConfig(0.0, 10)
    with pytest.raises(ValueError):
        PropagatorConfig(1e-6, -1)
    with pytest.raises(ValueError):
        PropagatorConfig(1e-6, 10, (5e-6, 2e-6))
    with pytest.raises(ValueError):
        PropagatorConfig(1e-6, 10, (2.5e-6,))
    with pytest.raises(ValueError):
        PropagatorConfig(1e-6, 10, (2e-5,))
    cfg = PropagatorConfig.uniform(1e-6, 1e-5, 3)
    assert cfg.n_steps == 10 and cfg.snapshot_steps == (0, 5, 10)


def test_phase_guard():
    g = GridSpec(256, 4.0)
    with pytest.raises(EvolutionError, match="rad per step"):
        check_guards(g, WELL, PropagatorConfig(1e-5, 10))


def test_light_cone_guard():
    g = GridSpec(64, 1.0)
    with pytest.raises(EvolutionError, match="light-cone"):
        check_guards(g, WELL, PropagatorConfig(1e-6, 2000))


@pytest.mark.parametrize("branch", list(Branch))
def test_free_eigenstate_only_gains_a_phase(branch):
    g = GridSpec(128, 2.0)
    label = BasisLabel(5, branch)
    psi = free_eigenstate(label, g)
    cfg = PropagatorConfig(1e-6, 400)
    out = propagate(psi, FREE, cfg)
    expected = psi.values * np.exp(-1j * label.energy(g) * cfg.t_total)
    assert np.max(np.abs(out.values - expected)) * np.sqrt(g.box_length) < 1e-9


def test_norm_is_preserved():
    g = GridSpec(256, 4.0)
    psi = _random_field(g, 3)
    out = propagate(psi, WELL, PropagatorConfig(1e-6, 500))
    assert abs(out.norm() - 1.0) < 1e-10


def test_propagate_matches_dense_exponential():
    g = GridSpec(64, 2.0)
    psi = _random_field(g, 0)
    cfg = PropagatorConfig(1e-7, 5000)
    out = propagate(psi, WELL, cfg)
    h = dense_position_hamiltonian(g, box_potential(g, WELL))
    vec = np.concatenate([psi.values[:, 0], psi.values[:, 1]])
    exact = dense_evolve(h, vec, cfg.t_total)
    got = np.concatenate([out.values[:, 0], out.values[:, 1]])
    assert np.sqrt(g.dz) * np.linalg.norm(exact - got) < 1e-6


def test_snapshot_at_time_zero_is_identity():
    g = GridSpec(32, 2.0)
    cfg = PropagatorConfig(1e-6, 5, (0.0, 5e-6))
    snaps = list(iter_bogoliubov(g, WELL, cfg, (Branch.NEGATIVE, Branch.POSITIVE)))
    eye = BogoliubovMatrix.identity(32)
    for name, block in eye.blocks().items():
        assert np.allclose(getattr(snaps[0], name), block, atol=1e-14)
    assert snaps[1].time == 5e-6


def test_free_evolution_creates_no_pairs():
    g = GridSpec(64, 2.0)
    cfg = PropagatorConfig(1e-6, 200)
    (snap,) = iter_bogoliubov(g, FREE, cfg, (Branch.NEGATIVE, Branch.POSITIVE))
    assert np.max(np.abs(snap.u_pn)) < 1e-10
    assert np.max(np.abs(snap.u_np)) < 1e-10


def test_full_matrix_is_unitary():
    g = GridSpec(128, 4.0)
    cfg = PropagatorConfig(1e-6, 300)
    (snap,) = iter_bogoliubov(g, WELL, cfg, (Branch.POSITIVE, Branch.NEGATIVE))
    u = snap.full()
    assert np.max(np.abs(u @ u.conj().T - np.eye(256))) < 1e-10
    assert np.max(np.abs(snap.column_norms() - 1)) < 1e-10


def test_blocks_match_dense_bogoliubov():
    g = GridSpec(32, 2.0)
    cfg = PropagatorConfig(1e-7, 2000)
    (snap,) = iter_bogoliubov(g, WELL, cfg, (Branch.POSITIVE, Branch.NEGATIVE))
    (exact,) = dense_bogoliubov(g, box_potential(g, WELL, fft_order=True), [cfg.t_total])
    for name, block in exact.items():
        assert np.max(np.abs(getattr(snap, name) - block)) < 1e-6, name


def test_occupations_match_blocks():
    g = GridSpec(64, 2.0)
    cfg = PropagatorConfig(1e-6, 200, (1e-4, 2e-4))
    both = (Branch.POSITIVE, Branch.NEGATIVE)
    snaps = list(iter_bogoliubov(g, WELL, cfg, both))
    occs = list(iter_occupations(g, WELL, cfg, both))
    for s, o in zip(snaps, occs):
        assert o.time == s.time
        assert np.allclose(o.electron, (np.abs(s.u_pn) ** 2).sum(axis=1), atol=1e-15)
        assert np.allclose(o.positron, (np.abs(s.u_np) ** 2).sum(axis=1), atol=1e-15)


def test_branch_order_does_not_change_results():
    g = GridSpec(64, 2.0)
    cfg = PropagatorConfig(1e-6, 50)
    (a,) = iter_bogoliubov(g, WELL, cfg, (Branch.POSITIVE, Branch.NEGATIVE))
    (b,) = iter_bogoliubov(g, WELL, cfg, ("negative", "positive"))
    for name in ("u_pp", "u_pn", "u_np", "u_nn"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_single_branch_leaves_other_blocks_empty():
    g = GridSpec(32, 2.0)
    (snap,) = iter_bogoliubov(g, WELL, PropagatorConfig(1e-6, 10), (Branch.POSITIVE,))
    assert snap.has_positive and not snap.has_negative
    assert snap.mask == 1 | 4
    with pytest.raises(ValueError):
        snap.full()


def test_snapshot_round_trip(tmp_path):
    g = GridSpec(32, 2.0)
    (snap,) = iter_bogoliubov(g, WELL, PropagatorConfig(1e-6, 20), (Branch.NEGATIVE,))
    path = tmp_path / "s.pwu"
    write_snapshot(path, snap)
    assert path.stat().st_size == 20 + 2 * 16 * 32 * 32
    for mm in (False, True):
        back = read_snapshot(path, mmap=mm)
        assert back.time == snap.time and back.n_z == 32
        assert back.u_pp is None and back.u_np is None
        assert np.array_equal(back.u_pn, snap.u_pn)
        assert np.array_equal(back.u_nn, snap.u_nn)


def test_snapshot_rejects_corrupt_files(tmp_path):
    bad = tmp_path / "bad.pwu"
    bad.write_bytes(b"XXXX" + bytes(16))
    with pytest.raises(ValueError, match="magic"):
        read_snapshot(bad)
    g = GridSpec(8, 1.0)
    (snap,) = iter_bogoliubov(g, WELL, PropagatorConfig(1e-6, 1), (Branch.NEGATIVE,))
    path = tmp_path / "t.pwu"
    write_snapshot(path, snap)
    path.write_bytes(path.read_bytes()[:-16])
    with pytest.raises(ValueError, match="bytes"):
        read_snapshot(path)


def test_spill_to_disk(tmp_path):
    g = GridSpec(32, 2.0)
    cfg = PropagatorConfig(1e-6, 20, (1e-5, 2e-5))
    in_memory = bogoliubov_evolution(g, WELL, cfg)
    spilled = bogoliubov_evolution(g, WELL, cfg, memory_budget=1, spill_dir=tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["snapshot_00000.pwu", "snapshot_00001.pwu"]
    for a, b in zip(in_memory, spilled):
        assert isinstance(b.u_pn, np.memmap)
        assert np.array_equal(a.u_pn, b.u_pn)


def test_runs_are_deterministic():
    g = GridSpec(64, 2.0)
    cfg = PropagatorConfig(1e-6, 100)
    (a,) = iter_occupations(g, WELL, cfg, (Branch.POSITIVE,))
    (b,) = iter_occupations(g, WELL, cfg, (Branch.POSITIVE,))
    assert np.array_equal(a.positron, b.positron)
