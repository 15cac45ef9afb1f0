"""Compare the numba and numpy kernel backends.

Times each kernel on a batch of basis states, checks that both backends
agree, and times a full split-operator step in a subprocess per backend
(the backend is fixed at import time by PAIRWELL_DISABLE_NUMBA).

    python benchmarks/bench_kernels.py --n-z 512 --repeat 5 --json out.json
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from pairwell import _kernels


def best_of(fn, repeat):
    fn()  # warm-up (compiles the numba version)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_table(n_z, n_states, repeat):
    rng = np.random.default_rng(1)
    psi = rng.normal(size=(2, n_states, n_z)) + 1j * rng.normal(size=(2, n_states, n_z))
    m = [rng.normal(size=n_z) + 1j * rng.normal(size=n_z) for _ in range(4)]
    phase = np.exp(1j * rng.normal(size=n_z))
    chi_p, chi_n = rng.normal(size=(2, n_z)), rng.normal(size=(2, n_z))

    impls = {"numpy": {
        "apply_spinor_matrix": _kernels._apply_spinor_matrix_numpy,
        "apply_phase": _kernels._apply_phase_numpy,
        "project": _kernels._project_numpy,
        "branch_weights": _kernels._branch_weights_numpy,
    }}
    if _kernels.NUMBA_AVAILABLE:
        impls["numba"] = {
            "apply_spinor_matrix": _kernels._apply_spinor_matrix_numba,
            "apply_phase": _kernels._apply_phase_numba,
            "project": _kernels._project_numba,
            "branch_weights": _kernels._branch_weights_numba,
        }

    calls = {
        "apply_spinor_matrix": lambda f, x: f(x, *m),
        "apply_phase": lambda f, x: f(x, phase),
        "project": lambda f, x: f(x, chi_p, chi_n),
        "branch_weights": lambda f, x: f(x, chi_p, chi_n),
    }
    rows = {}
    for name, call in calls.items():
        outs = {}
        for backend, funcs in impls.items():
            work = psi.copy()
            rows.setdefault(name, {})[backend] = best_of(lambda: call(funcs[name], work), repeat)
            work = psi.copy()
            outs[backend] = call(funcs[name], work)
            if outs[backend] is None:
                outs[backend] = work
        if len(outs) == 2:
            a, b = (np.concatenate([np.ravel(x) for x in np.atleast_1d(o)]) if isinstance(o, tuple) else np.ravel(o)
                    for o in outs.values())
            rows[name]["max_abs_diff"] = float(np.max(np.abs(a - b)))
    return rows


STEP_SCRIPT = """
import json, sys, time
from pairwell.dirac_core import C_LIGHT, Branch, GridSpec, WellParams
from pairwell.evolution import SplitOperator
from pairwell import _kernels
n_z, steps = int(sys.argv[1]), int(sys.argv[2])
op = SplitOperator(GridSpec(n_z, 8.0), WellParams(2.5, 0.25, 0.3 / C_LIGHT, 0.2), 1e-6)
a = op.initial_states([Branch.POSITIVE])
a = op.advance(a, 2)
t0 = time.perf_counter()
a = op.advance(a, steps)
print(json.dumps({"backend": _kernels.backend(), "seconds_per_step": (time.perf_counter() - t0) / steps}))
"""


def step_timing(n_z, steps):
    out = {}
    for disable in ("1", "0"):
        env = dict(os.environ, PAIRWELL_DISABLE_NUMBA=disable)
        res = subprocess.run([sys.executable, "-c", STEP_SCRIPT, str(n_z), str(steps)],
                             env=env, capture_output=True, text=True, check=True)
        rec = json.loads(res.stdout.strip().splitlines()[-1])
        out[rec["backend"]] = rec["seconds_per_step"]
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-z", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=20)
    ap.add_argument("--json", default=None, help="write results to this file")
    args = ap.parse_args()

    result = {
        "n_z": args.n_z,
        "kernels": kernel_table(args.n_z, args.n_z, args.repeat),
        "step": step_timing(args.n_z, args.steps),
    }
    print(f"kernels on {args.n_z} states x {args.n_z} points (best of {args.repeat}, seconds)")
    for name, row in result["kernels"].items():
        cols = "  ".join(f"{k}={v:.3g}" for k, v in row.items())
        print(f"  {name:20s} {cols}")
    print("full split-operator step:", "  ".join(f"{k}={v:.3g}s" for k, v in result["step"].items()))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(result, fh, indent=2)


if __name__ == "__main__":
    main()
