"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
Run alone with ``pytest -m acceptance -s``.
"""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from swpm.collisions import CollisionEngine, ReductionController
from swpm.config import ExperimentConfig
from swpm.ensemble import reference_for, run_ensembles, run_experiment, table_errors
from swpm.moments import compute_moments
from swpm.particles import MixtureSpec, RandomSource, sample_initial_state
from swpm.reduction import ReductionScheme
from swpm.reference import equilibrium_moments

pytestmark = pytest.mark.acceptance

ROOT = Path(__file__).resolve().parents[1]
TABLE_SEED = 7


@pytest.fixture(scope="module")
def table():
    t0 = time.perf_counter()
    errs = table_errors(TABLE_SEED, m0=10240, n_reductions=10)
    return errs, time.perf_counter() - t0


def test_c1_pthf_heat_fluxes_exact(table, record_acceptance):
    errs, seconds = table
    pthf = errs[ReductionScheme.PTHF]
    ok = pthf["central_heat_flux"] < 1e-12 and pthf["raw_heat_flux"] < 1e-12 and seconds < 120
    record_acceptance(
        "C1 PTHF heat-flux error",
        ok,
        f"central {pthf['central_heat_flux']:.3e}, raw {pthf['raw_heat_flux']:.3e} (< 1e-12); {seconds:.1f} s",
    )
    assert ok


def test_c2_scheme_signatures(table, record_acceptance):
    errs, seconds = table
    en = errs[ReductionScheme.ENERGY]["central_heat_flux"]
    hf = errs[ReductionScheme.ENERGY_HF]
    ok = (
        abs(en - 1.0) < 1e-12
        and hf["central_heat_flux"] < 1e-12
        and 3e-3 <= hf["raw_heat_flux"] <= 6e-2
        and seconds < 240
    )
    record_acceptance(
        "C2 scheme signatures",
        ok,
        f"energy central {en!r} (= 1); energy_hf central {hf['central_heat_flux']:.3e} (< 1e-12), "
        f"raw {hf['raw_heat_flux']:.4f} (in [3e-3, 6e-2])",
    )
    assert ok


def test_c3_conservation_over_full_run(record_acceptance):
    t0 = time.perf_counter()
    rng = RandomSource(2024)
    state = sample_initial_state(MixtureSpec(), 1024, rng)
    before = compute_moments(state.velocities, state.weights)
    reducer = ReductionController(ReductionScheme.PTHF, 1024)
    CollisionEngine(rng, reducer=reducer).run_until(state, 3.0)
    after = compute_moments(state.velocities, state.weights)
    dw = abs(after.rho - before.rho) / before.rho
    dm = np.linalg.norm(after.momentum - before.momentum) / np.linalg.norm(before.momentum)
    de = abs(after.energy - before.energy) / before.energy
    seconds = time.perf_counter() - t0
    ok = dw <= 1e-10 and dm < 1e-9 and de < 1e-9 and reducer.count > 0
    record_acceptance(
        "C3 conservation",
        ok,
        f"weight {dw:.1e}, momentum {dm:.1e}, energy {de:.1e} over {reducer.count} reductions; {seconds:.1f} s",
    )
    assert ok


def fourth_moment_check(scheme, seed):
    config = ExperimentConfig(scheme=scheme, m0=1024, N=500, t_end=3.0, seed=seed)
    series = run_experiment(config)
    ref = reference_for(config)
    err = series.relative_error("s", ref)
    ci = series.half_width("s", ref)
    return err[-1], ci[-1], err.max(), ci.max()


def test_c4_fourth_moment_ordering(record_acceptance):
    t0 = time.perf_counter()
    pthf_wins = energy_fails = 0
    lines = []
    for rep in range(5):
        seed = 4000 + rep
        e_p, c_p, sup_e_p, sup_c_p = fourth_moment_check(ReductionScheme.PTHF, seed)
        e_e, c_e, sup_e_e, sup_c_e = fourth_moment_check(ReductionScheme.ENERGY, seed)
        pthf_wins += e_p < c_p
        energy_fails += e_e >= c_e
        lines.append(
            f"rep {rep}: pthf E={e_p:.4f} CI={c_p:.4f} (sup {sup_e_p:.4f}/{sup_c_p:.4f}), "
            f"energy E={e_e:.4f} CI={c_e:.4f} (sup {sup_e_e:.4f}/{sup_c_e:.4f})"
        )
    ok = pthf_wins >= 4 and energy_fails >= 4
    print("\n" + "\n".join(lines))
    record_acceptance(
        "C4 fourth-moment ordering at t=3",
        ok,
        f"PTHF E<CI in {pthf_wins}/5, energy E>=CI in {energy_fails}/5 (need >= 4 each); "
        f"{time.perf_counter() - t0:.0f} s",
    )
    assert ok


def test_c5_equilibrium_limit(record_acceptance):
    t0 = time.perf_counter()
    config = ExperimentConfig(m0=2048, N=100, t_end=12.0, time_grid_points=2, seed=55, reference="equilibrium")
    series = run_experiment(config)
    eq = equilibrium_moments(config.mixture)
    assert eq.series("Pi11")[0] == pytest.approx(8 / 3) and eq.series("s")[0] == pytest.approx(403 / 3)
    checks = {}
    for name in ("Pi11", "s"):
        checks[name] = (series.relative_error(name, eq)[-1], series.half_width(name, eq)[-1])
    seconds = time.perf_counter() - t0
    ok = all(e <= 3 * c for e, c in checks.values()) and seconds < 600
    record_acceptance(
        "C5 equilibrium limit at t=12",
        ok,
        ", ".join(f"{n} E={e:.4f} 3CI={3 * c:.4f}" for n, (e, c) in checks.items()) + f"; {seconds:.0f} s",
    )
    assert ok


def test_c6_property_suites_standalone(record_acceptance):
    t0 = time.perf_counter()
    res = subprocess.run(
        [sys.executable, "-m", "pytest", "-m", "property", "-q", "-p", "no:cacheprovider", str(ROOT / "tests")],
        capture_output=True,
        text=True,
        cwd=ROOT,
        timeout=600,
    )
    seconds = time.perf_counter() - t0
    summary = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr[-200:]
    ok = res.returncode == 0 and seconds < 180
    record_acceptance("C6 property suites standalone", ok, f"{summary}; {seconds:.0f} s (< 180 s)")
    assert ok, res.stdout[-3000:]


def test_c7_runtime_linear_in_m0(record_acceptance):
    grid = (256, 512, 1024, 2048, 4096, 10240)
    per_particle = {}
    for m0 in grid:
        config = ExperimentConfig(m0=m0, N=10, seed=31, workers=1)
        run_ensembles(config.replace(N=1))  # warm-up
        t0 = time.perf_counter()
        run_ensembles(config)
        per_particle[m0] = (time.perf_counter() - t0) / m0
    spread = max(per_particle.values()) / min(per_particle.values())
    ok = spread <= 2.0
    record_acceptance(
        "C7 runtime linear in m0",
        ok,
        f"max/min of time per m0 = {spread:.2f} (<= 2); "
        + ", ".join(f"{m}:{1e6 * v:.1f}us" for m, v in per_particle.items()),
    )
    assert ok
