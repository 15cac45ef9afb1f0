"""Scenario configs, dispatch to the analytic and field-theory pipelines, and
the output manifest.

Configs are INI files. Every physical value carries a unit suffix: ``c2``
for energies (units of c^2), ``au`` for lengths and times. A length may be
written as a multiple of 1/c, e.g. ``w = 0.3/c au``. Example::

    [scenario]
    mode = cqft_spectra

    [well]
    v1 = 2.5 c2
    v2 = 0, 0.1, 0.25 c2
    w = 0.3/c au
    d = 0.2 au

    [grid]
    n_z = 1024
    box_length = 8 au

    [propagation]
    dt = 1e-6 au
    t_end = 0.01 au
"""

from __future__ import annotations

import configparser
import hashlib
import json
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, _kernels
from .analytic import (
    default_v1_samples,
    extrapolate_level,
    find_bound_states,
    find_resonances,
    fit_all_levels,
    relative_error_percent,
    transmission_solutions,
    write_level_table,
)
from .dirac_core import C_LIGHT, Branch, GridSpec, WellParams
from .evolution import (
    EvolutionError,
    Occupations,
    PropagatorConfig,
    check_guards,
    iter_bogoliubov,
    iter_occupations,
    write_snapshot,
)
from .observables import (
    NumberSeries,
    Species,
    energy_spectrum,
    growth_rate,
    momentum_distribution,
    number_series,
    provenance_lines,
    write_numbers_csv,
    write_spectrum_csv,
)

MODES = (
    "analytic_levels",
    "symmetric_appendix",
    "fit_extrapolate",
    "cqft_spectra",
    "cqft_timeseries",
    "enhancement_compare",
)
CQFT_MODES = ("cqft_spectra", "cqft_timeseries", "enhancement_compare")
COMPARE_ROLES = ("asymmetric", "well_only", "step_only")
ADDITIVE_RTOL = 1e-3


class ConfigError(ValueError):
    """Invalid scenario; ``problems`` lists one message per offending field."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_QUANTITY = re.compile(r"^\s*(?P<num>[-+0-9.eE]+)\s*(?P<overc>/\s*c)?\s+(?P<unit>\S+)\s*$")


def parse_quantity(text: str, unit: str, c: float = C_LIGHT) -> float:
    m = _QUANTITY.match(text)
    if not m:
        raise ValueError(f"expected '<number> {unit}', got {text!r}")
    if m["unit"] != unit:
        raise ValueError(f"expected unit {unit!r}, got {m['unit']!r}")
    value = float(m["num"])
    return value / c if m["overc"] else value


def parse_quantity_list(text: str, unit: str, c: float = C_LIGHT) -> list[float]:
    """``'0, 0.1, 0.25 c2'`` -> ``[0.0, 0.1, 0.25]``; the unit goes last."""
    head, _, tail = text.rpartition(",")
    if not head:
        return [parse_quantity(text, unit, c)]
    last = parse_quantity(tail, unit, c)
    return [parse_quantity(f"{x.strip()} {unit}", unit, c) for x in head.split(",")] + [last]


@dataclass(frozen=True)
class Scenario:
    mode: str
    wells: dict[str, WellParams]
    grid: GridSpec | None = None
    propagation: PropagatorConfig | None = None
    output: Path | None = None
    species: tuple[Species, ...] = (Species.POSITRON,)
    v2_sweep: tuple[float, ...] = ()
    fit_samples: tuple[float, ...] = ()
    growth_window: tuple[float, float] | None = None
    save_snapshots: bool = False

    @property
    def well(self) -> WellParams:
        return next(iter(self.wells.values()))

    def branches(self) -> tuple[Branch, ...]:
        out = []
        if Species.POSITRON in self.species:
            out.append(Branch.POSITIVE)
        if Species.ELECTRON in self.species:
            out.append(Branch.NEGATIVE)
        return tuple(out)


def _get(cp, section, key, problems, required=True):
    if not cp.has_section(section):
        if required:
            problems.append(f"[{section}] {key}: missing (no [{section}] section)")
        return None
    if not cp.has_option(section, key):
        if required:
            problems.append(f"[{section}] {key}: missing")
        return None
    return cp.get(section, key)


def _parse_well(cp, section, problems, allow_sweep=False):
    vals = {}
    units = {"v1": "c2", "v2": "c2", "w": "au", "d": "au"}
    sweep = ()
    for key, unit in units.items():
        raw = _get(cp, section, key, problems, required=key != "w")
        if raw is None:
            continue
        try:
            if key == "v2" and allow_sweep and "," in raw:
                sweep = tuple(parse_quantity_list(raw, unit))
                vals[key] = sweep[0]
            else:
                vals[key] = parse_quantity(raw, unit)
        except ValueError as exc:
            problems.append(f"[{section}] {key}: {exc}")
    vals.setdefault("w", 0.0)
    if len(vals) < 4:
        return None, sweep
    try:
        return WellParams(**vals), sweep
    except ValueError as exc:
        problems.append(f"[{section}]: {exc}")
        return None, sweep


def load_scenario(path: str | Path, output: str | Path | None = None) -> Scenario:
    """Parse and validate a config. Raises :class:`ConfigError` listing every
    problem found, before any computation."""
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with path.open() as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    return scenario_from_parser(cp, output, base=path.parent)


def scenario_from_parser(cp: configparser.ConfigParser, output=None, base: Path = Path(".")) -> Scenario:
    problems: list[str] = []
    mode = _get(cp, "scenario", "mode", problems)
    if mode is not None and mode not in MODES:
        problems.append(f"[scenario] mode: {mode!r} is not one of {', '.join(MODES)}")
        mode = None

    wells, sweep = {}, ()
    if mode == "enhancement_compare":
        for role in COMPARE_ROLES:
            well, _ = _parse_well(cp, f"well.{role}", problems)
            if well is not None:
                wells[role] = well
    elif mode is not None:
        well, sweep = _parse_well(cp, "well", problems, allow_sweep=mode == "cqft_spectra")
        if well is not None:
            wells["well"] = well

    grid = cfg = None
    window = None
    species: tuple[Species, ...] = (Species.POSITRON,)
    save = False
    if mode in CQFT_MODES:
        n_z = _get(cp, "grid", "n_z", problems)
        box = _get(cp, "grid", "box_length", problems)
        try:
            grid = GridSpec(int(n_z), parse_quantity(box, "au")) if n_z and box else None
        except (ValueError, TypeError) as exc:
            problems.append(f"[grid]: {exc}")
        raw_dt = _get(cp, "propagation", "dt", problems, required=False)
        raw_t = _get(cp, "propagation", "t_end", problems)
        raw_every = _get(cp, "propagation", "snapshot_every", problems, required=False)
        try:
            dt = parse_quantity(raw_dt, "au") if raw_dt else 1e-6
            if raw_t:
                t_end = parse_quantity(raw_t, "au")
                n_steps = int(round(t_end / dt))
                if raw_every:
                    every = int(round(parse_quantity(raw_every, "au") / dt))
                    if every <= 0:
                        raise ValueError("snapshot_every must be positive")
                    steps = list(range(0, n_steps + 1, every))
                    if steps[-1] != n_steps:
                        steps.append(n_steps)
                else:
                    steps = [n_steps]
                cfg = PropagatorConfig(dt, n_steps, tuple(k * dt for k in steps))
        except ValueError as exc:
            problems.append(f"[propagation]: {exc}")
        raw_species = _get(cp, "output", "species", problems, required=False)
        if raw_species:
            try:
                species = tuple(Species(s.strip()) for s in raw_species.split(","))
            except ValueError as exc:
                problems.append(f"[output] species: {exc}")
        raw_save = _get(cp, "output", "snapshots", problems, required=False)
        if raw_save:
            save = raw_save.strip().lower() in ("1", "true", "yes")
        raw_win = _get(cp, "analysis", "growth_window", problems, required=False)
        if raw_win:
            try:
                window = tuple(parse_quantity_list(raw_win, "au"))
                if len(window) != 2 or window[0] >= window[1]:
                    raise ValueError("growth_window needs two increasing times")
            except ValueError as exc:
                problems.append(f"[analysis] growth_window: {exc}")
                window = None
        if grid is not None and cfg is not None:
            for role, well in wells.items():
                if well.w <= 0:
                    problems.append(f"[{_well_section(role)}] w: must be > 0 for field-theory runs")
                    continue
                for v2 in sweep or (well.v2,):
                    try:
                        check_guards(grid, replace(well, v2=v2), cfg)
                    except EvolutionError as exc:
                        problems.append(f"[propagation]: {exc}")
                        break
        if mode == "cqft_timeseries" and cfg is not None and len(cfg.snapshot_times) < 2:
            problems.append("[propagation] snapshot_every: a time series needs at least two snapshots")
        if mode == "enhancement_compare" and cfg is not None and window is None:
            t = cfg.t_total
            window = (2.0 * t / 3.0, t)

    samples = ()
    if mode == "fit_extrapolate":
        raw = _get(cp, "fit", "v1_samples", problems, required=False)
        if raw:
            try:
                samples = tuple(parse_quantity_list(raw, "c2"))
            except ValueError as exc:
                problems.append(f"[fit] v1_samples: {exc}")

    if mode == "symmetric_appendix" and "well" in wells and not wells["well"].symmetric:
        problems.append("[well] v2: symmetric_appendix needs v1 == v2")

    out = output
    if out is None:
        raw = _get(cp, "scenario", "output", problems, required=False)
        out = base / raw if raw else None
    if out is None:
        problems.append("[scenario] output: missing (or pass --out)")
    if problems:
        raise ConfigError(problems)
    return Scenario(mode, wells, grid, cfg, Path(out), species, sweep, samples, window, save)


def _well_section(role):
    return "well" if role == "well" else f"well.{role}"


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:g}".replace("-", "m").replace(".", "p")


def _comments(well: WellParams) -> list[str]:
    return [line[2:] for line in provenance_lines(None, well)]


def _analytic_levels(sc: Scenario, out: Path) -> list[Path]:
    well = sc.well.sharp()
    rows = []
    if not well.step_supercritical:
        for s in reversed(find_bound_states(well)):
            rows.append({"level": s.level_index, "E_boud_re": s.energy.real, "E_boud_im": 0.0})
        note = "real roots in the bound window"
    else:
        fits = {f.level_index: f for f in fit_all_levels(well)} if not well.symmetric else {}
        for s in reversed(find_resonances(well)):
            row = {"level": s.level_index}
            if fits:
                fit = fits.get(s.level_index)
                row["E_fit"] = extrapolate_level(fit, well.v1) if fit else float("nan")
            row.update({"E_boud_re": s.energy.real, "E_boud_im": s.energy.imag})
            rows.append(row)
        note = "complex continuation roots; Im E reported non-negative"
    if not rows:
        rows = [{"level": 0, "E_boud_re": float("nan"), "E_boud_im": float("nan")}]
    return [write_level_table(out / "levels.csv", rows, _comments(well) + [note])]


def _symmetric_appendix(sc: Scenario, out: Path) -> list[Path]:
    well = sc.well.sharp()
    roots = list(reversed(find_resonances(well)))
    peaks = list(reversed(transmission_solutions(well)))
    rows = []
    for r, p in zip(roots, peaks):
        rows.append({
            "level": r.level_index,
            "E_boud_re": r.energy.real,
            "E_boud_im": r.energy.imag,
            "E_tran": p.energy.real,
            "fwhm_half": p.fwhm_half,
            "rel_err_re_pct": relative_error_percent(r.energy.real, p.energy.real),
            "rel_err_im_pct": relative_error_percent(r.energy.imag, p.fwhm_half),
        })
    comments = _comments(well) + ["half width taken at T_peak/2"]
    return [write_level_table(out / "symmetric_levels.csv", rows, comments)]


def _fit_extrapolate(sc: Scenario, out: Path) -> list[Path]:
    well = sc.well.sharp()
    samples = sc.fit_samples or tuple(default_v1_samples())
    rows = []
    for f in fit_all_levels(well, samples):
        rows.append({
            "level": f.level_index,
            "intercept": f.intercept,
            "slope": f.slope,
            "correlation": f.correlation,
            "E_extrapolated": extrapolate_level(f, well.v1),
        })
    comments = _comments(well) + [
        f"fit over V1 in [{min(samples):g}, {max(samples):g}] c2, {len(samples)} samples",
        f"extrapolated to V1 = {well.v1:g} c2",
    ]
    return [write_level_table(out / "fits.csv", rows, comments)]


def _cqft_spectra(sc: Scenario, out: Path, threads) -> list[Path]:
    files = []
    for v2 in sc.v2_sweep or (sc.well.v2,):
        well = replace(sc.well, v2=v2)
        final = None
        for final in iter_occupations(sc.grid, well, sc.propagation, sc.branches(), threads):
            pass
        for sp in sc.species:
            spec = energy_spectrum(final, sp, sc.grid, well.c)
            files.append(write_spectrum_csv(out / f"spectrum_v2_{_fmt(v2)}_{sp.value}.csv", spec, sc.grid, well))
    return files


@dataclass
class TimeseriesResult:
    grid: GridSpec
    cfg: PropagatorConfig
    params: WellParams
    series: NumberSeries
    final: Occupations
    files: list[Path] = field(default_factory=list)


def run_timeseries(grid, params, cfg, branches=(Branch.POSITIVE,), threads=None, out: Path | None = None,
                   tag: str = "", save_snapshots: bool = False) -> TimeseriesResult:
    files = []
    if save_snapshots:
        snaps = []
        for i, snap in enumerate(iter_bogoliubov(grid, params, cfg, branches, threads)):
            path = out / f"snapshot{tag}_{i:05d}.pwu"
            write_snapshot(path, snap)
            files.append(path)
            snaps.append(_reduce(snap))
    else:
        snaps = list(iter_occupations(grid, params, cfg, branches, threads))
    series = number_series(snaps, params, grid, params.c)
    if out is not None:
        files.insert(0, write_numbers_csv(out / f"numbers{tag}.csv", series, grid, params))
        if snaps[-1].positron is not None:
            spec = energy_spectrum(snaps[-1], Species.POSITRON, grid, params.c)
            files.insert(1, write_spectrum_csv(out / f"spectrum{tag}_final_positron.csv", spec, grid, params))
    return TimeseriesResult(grid, cfg, params, series, snaps[-1], files)


def _reduce(snap):
    def dist(sp):
        try:
            return momentum_distribution(snap, sp)
        except ValueError:
            return None

    return Occupations(snap.time, snap.n_z, dist(Species.ELECTRON), dist(Species.POSITRON))


@dataclass(frozen=True)
class ComparisonReport:
    gamma_a: float
    gamma_b: float
    gamma_c: float
    window: tuple[float, float]
    verdict: str

    @property
    def gamma_sum(self) -> float:
        return self.gamma_b + self.gamma_c


def enhancement_compare(a: TimeseriesResult, b: TimeseriesResult, c: TimeseriesResult | None,
                        window: tuple[float, float], column: str = "positron",
                        rtol: float = ADDITIVE_RTOL) -> ComparisonReport:
    """Late-window growth rates of the asymmetric well (a) against the sum of
    the well-only (b) and step-only (c) rates. ``c`` may be ``None``."""
    for other in (b, c):
        if other is None:
            continue
        if other.grid != a.grid:
            raise ValueError("runs use different grids")
        if other.cfg.dt != a.cfg.dt or not np.array_equal(other.series.times, a.series.times):
            raise ValueError("runs use different time samples")
    ga = growth_rate(a.series, window, column)
    gb = growth_rate(b.series, window, column)
    gc = growth_rate(c.series, window, column) if c is not None else 0.0
    scale = max(abs(ga), abs(gb + gc), 1e-300)
    if abs(ga - (gb + gc)) <= rtol * scale:
        verdict = "additive"
    elif ga > gb + gc:
        verdict = "superadditive"
    else:
        verdict = "subadditive"
    return ComparisonReport(ga, gb, gc, tuple(window), verdict)


def _cqft_timeseries(sc: Scenario, out: Path, threads) -> list[Path]:
    res = run_timeseries(sc.grid, sc.well, sc.propagation, sc.branches(), threads, out,
                         save_snapshots=sc.save_snapshots)
    return res.files


def _enhancement_compare(sc: Scenario, out: Path, threads) -> list[Path]:
    results = {}
    files = []
    for role in COMPARE_ROLES:
        res = run_timeseries(sc.grid, sc.wells[role], sc.propagation, (Branch.POSITIVE,), threads, out,
                             tag=f"_{role}")
        results[role] = res
        files.extend(res.files)
    rep = enhancement_compare(results["asymmetric"], results["well_only"], results["step_only"], sc.growth_window)
    path = out / "comparison.json"
    path.write_text(json.dumps({
        "Gamma_A": rep.gamma_a,
        "Gamma_B": rep.gamma_b,
        "Gamma_C": rep.gamma_c,
        "Gamma_B_plus_C": rep.gamma_sum,
        "window": list(rep.window),
        "verdict": rep.verdict,
    }, indent=2) + "\n")
    files.append(path)
    return files


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_loaded(sc: Scenario, config_bytes: bytes = b"", threads: int | None = None) -> dict:
    """Run a validated scenario; returns the manifest (also written to disk)."""
    out = sc.output
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    if sc.mode == "analytic_levels":
        files = _analytic_levels(sc, out)
    elif sc.mode == "symmetric_appendix":
        files = _symmetric_appendix(sc, out)
    elif sc.mode == "fit_extrapolate":
        files = _fit_extrapolate(sc, out)
    elif sc.mode == "cqft_spectra":
        files = _cqft_spectra(sc, out, threads)
    elif sc.mode == "cqft_timeseries":
        files = _cqft_timeseries(sc, out, threads)
    else:
        files = _enhancement_compare(sc, out, threads)
    manifest = {
        "mode": sc.mode,
        "input_sha256": hashlib.sha256(config_bytes).hexdigest(),
        "code_version": __version__,
        "kernel_backend": _kernels.backend(),
        "wall_time_s": time.perf_counter() - start,
        "outputs": [{"path": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size} for p in files],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def run_scenario(config_file: str | Path, output: str | Path | None = None, threads: int | None = None) -> dict:
    sc = load_scenario(config_file, output)
    return run_loaded(sc, Path(config_file).read_bytes(), threads)


def verify_manifest(directory: str | Path) -> bool:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    return all(_sha256(directory / e["path"]) == e["sha256"] for e in manifest["outputs"])
