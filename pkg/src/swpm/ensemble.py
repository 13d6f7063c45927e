"""
Ensemble runs and their statistics.

Each ensemble draws its own random stream (``seed XOR splitmix64(index)``),
so results do not depend on how the ensembles are spread over worker
processes. Per-ensemble moment series are gathered in index order.
"""

from __future__ import annotations

import math
import multiprocessing as mp
import os
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .collisions import FULL_TRANSFER, HALF_TRANSFER, CollisionEngine, ReductionController
from .config import ExperimentConfig
from .errors import ParameterError, SWPMError
from .moments import K, SCALAR_INDEX
from .particles import MixtureSpec, RandomSource, sample_initial_state
from .reduction import ReductionScheme
from .reference import (
    ReferenceMoments,
    ReferenceSource,
    equilibrium_moments,
    hierarchy_moments,
)

DEFAULT_CI_ALPHA = 1e-3


class EnsembleFailure(SWPMError, RuntimeError):
    """One ensemble raised; carries its index and seed so it can be replayed."""

    def __init__(self, index: int, seed: int, cause: str):
        self.index = index
        self.seed = seed
        super().__init__(f"ensemble {index} (seed {seed}) failed: {cause}")


def relative_error(reference, mean) -> float:
    """``|reference - mean| / |reference|`` (2-norms for vectors); NaN if the reference is zero."""
    ref = np.asarray(reference, dtype=np.float64)
    ref_norm = float(np.linalg.norm(ref))
    if ref_norm == 0.0:
        return math.nan
    return float(np.linalg.norm(ref - np.asarray(mean, dtype=np.float64))) / ref_norm


def z_score(alpha: float = DEFAULT_CI_ALPHA) -> float:
    """Two-sided standard normal quantile ``z_{1 - alpha/2}``."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return NormalDist().inv_cdf(1.0 - 0.5 * alpha)


def confidence_half_width(samples, reference: float, alpha: float = DEFAULT_CI_ALPHA) -> float:
    """Relative half-width ``z sqrt(var / N) / |reference|`` with the unbiased variance."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.shape[0] < 2:
        raise ParameterError(f"at least two samples are needed, got {x.shape[0]}")
    if reference == 0.0:
        raise ParameterError("reference must be non-zero")
    var = float(np.var(x, ddof=1))
    return z_score(alpha) * math.sqrt(var / x.shape[0]) / abs(reference)


@dataclass
class EnsembleResult:
    index: int
    seed: int
    samples: np.ndarray  # (grid, K)
    collision_seconds: float
    reduction_seconds: float
    wall_seconds: float
    reductions: int
    final_count: int


@dataclass
class EnsembleSeries:
    """Moment time series of ``N`` ensembles on a common time grid."""

    time_grid: np.ndarray
    samples: np.ndarray  # (N, grid, K)
    seeds: np.ndarray
    collision_seconds: np.ndarray
    reduction_seconds: np.ndarray
    wall_seconds: np.ndarray
    reductions: np.ndarray
    alpha: float = DEFAULT_CI_ALPHA
    label: str = ""
    config: ExperimentConfig | None = field(default=None, repr=False)

    @classmethod
    def from_results(cls, time_grid, results, alpha=DEFAULT_CI_ALPHA, label="", config=None) -> EnsembleSeries:
        results = sorted(results, key=lambda r: r.index)
        return cls(
            time_grid=np.asarray(time_grid, dtype=np.float64),
            samples=np.stack([r.samples for r in results]),
            seeds=np.array([r.seed for r in results], dtype=np.uint64),
            collision_seconds=np.array([r.collision_seconds for r in results]),
            reduction_seconds=np.array([r.reduction_seconds for r in results]),
            wall_seconds=np.array([r.wall_seconds for r in results]),
            reductions=np.array([r.reductions for r in results]),
            alpha=alpha,
            label=label,
            config=config,
        )

    @property
    def n_ensembles(self) -> int:
        return self.samples.shape[0]

    def values(self, name: str) -> np.ndarray:
        """``(N, grid)`` samples of one scalar component."""
        return self.samples[:, :, SCALAR_INDEX[name]]

    def mean(self, name: str) -> np.ndarray:
        return self.values(name).mean(axis=0)

    def variance(self, name: str) -> np.ndarray:
        if self.n_ensembles < 2:
            raise ParameterError("the variance needs at least two ensembles")
        return self.values(name).var(axis=0, ddof=1)

    def relative_error(self, name: str, reference: ReferenceMoments) -> np.ndarray:
        ref = self._reference_series(name, reference)
        mean = self.mean(name)
        return np.array([relative_error(r, m) for r, m in zip(ref, mean)])

    def half_width(self, name: str, reference: ReferenceMoments) -> np.ndarray:
        ref = self._reference_series(name, reference)
        vals = self.values(name)
        return np.array(
            [confidence_half_width(vals[:, n], ref[n], self.alpha) if ref[n] != 0.0 else math.nan for n in range(len(ref))]
        )

    def _reference_series(self, name: str, reference: ReferenceMoments) -> np.ndarray:
        ref = reference.series(name)
        if ref.shape[0] == 1:
            return np.full(self.time_grid.shape[0], ref[0])
        if ref.shape[0] != self.time_grid.shape[0]:
            raise ParameterError("reference and ensemble grids differ in length")
        return ref

    def mean_flat(self) -> np.ndarray:
        """Ensemble-mean flat moment vectors, ``(grid, K)``."""
        return self.samples.mean(axis=0)

    def statistics(self, names, reference: ReferenceMoments) -> list[tuple[float, str, str, float]]:
        """Long-format rows ``(time, moment, stat, value)``."""
        rows = []
        cols = {}
        for name in names:
            cols[name] = {
                "mean": self.mean(name),
                "variance": self.variance(name) if self.n_ensembles >= 2 else np.full(len(self.time_grid), math.nan),
                "reference": self._reference_series(name, reference),
                "relative_error": self.relative_error(name, reference),
                "half_width": self.half_width(name, reference) if self.n_ensembles >= 2 else np.full(len(self.time_grid), math.nan),
            }
        for n, t in enumerate(self.time_grid):
            for name in names:
                for stat, col in cols[name].items():
                    rows.append((float(t), name, stat, float(col[n])))
        return rows


def ensemble_seed(seed: int, index: int) -> int:
    return RandomSource(seed).substream(index).seed


def run_single_ensemble(config: ExperimentConfig, index: int, oracle: bool = False) -> EnsembleResult:
    """One independent realisation of ``config``; the oracle mode is equal-weight DSMC without reduction."""
    rng = RandomSource(config.seed).substream(index)
    t0 = _time.perf_counter()
    try:
        trigger = math.ceil(config.trigger_factor * config.m0)
        state = sample_initial_state(config.mixture, config.m0, rng, capacity=config.m0 + 2 if oracle else trigger + 2)
        if oracle:
            engine = CollisionEngine(rng, transfer_fraction=FULL_TRANSFER)
        else:
            reducer = ReductionController(config.scheme, config.m0, config.trigger_factor, config.target_factor)
            engine = CollisionEngine(rng, reducer=reducer, transfer_fraction=HALF_TRANSFER)
        engine.run_until(state, config.t_end, record_times=config.time_grid)
    except Exception as exc:  # noqa: BLE001 - reported with the seed, then re-raised by the caller
        raise EnsembleFailure(index, rng.seed, f"{type(exc).__name__}: {exc}") from exc
    samples = np.array([flat for _, flat in engine.records])
    if samples.shape != (len(config.time_grid), K):
        raise EnsembleFailure(index, rng.seed, f"recorded {samples.shape[0]} grid times")
    return EnsembleResult(
        index=index,
        seed=rng.seed,
        samples=samples,
        collision_seconds=engine.collision_seconds,
        reduction_seconds=engine.reduction_seconds,
        wall_seconds=_time.perf_counter() - t0,
        reductions=engine.reducer.count if engine.reducer is not None else 0,
        final_count=state.m,
    )


def _run_chunk(args):
    config, indices, oracle = args
    return [run_single_ensemble(config, i, oracle) for i in indices]


def resolve_workers(workers: int) -> int:
    if workers < 0:
        raise ParameterError(f"worker count must be >= 0, got {workers}")
    return workers or (os.cpu_count() or 1)


def run_ensembles(config: ExperimentConfig, oracle: bool = False, indices=None) -> list[EnsembleResult]:
    """Run ensembles ``indices`` (default ``range(N)``) on ``config.workers`` processes, sorted by index."""
    indices = sorted(range(config.N) if indices is None else indices)
    workers = min(resolve_workers(config.workers), max(1, len(indices)))
    if workers == 1:
        return [run_single_ensemble(config, i, oracle) for i in indices]
    # contiguous chunks, a few per worker so that stragglers even out
    n_chunks = min(len(indices), 4 * workers)
    chunks = [c.tolist() for c in np.array_split(np.array(indices), n_chunks) if c.size]
    ctx = mp.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        parts = list(pool.map(_run_chunk, [(config, c, oracle) for c in chunks]))
    results = [r for part in parts for r in part]
    results.sort(key=lambda r: r.index)
    return results


def run_experiment(config: ExperimentConfig) -> EnsembleSeries:
    """``N`` independent SWPM ensembles with reduction, recorded on ``config.time_grid``."""
    results = run_ensembles(config)
    return EnsembleSeries.from_results(
        config.time_grid, results, alpha=config.ci_alpha, label=config.scheme.value, config=config
    )


def run_oracle(config: ExperimentConfig) -> EnsembleSeries:
    """``N`` equal-weight DSMC ensembles without reduction (same seeds and grid)."""
    results = run_ensembles(config, oracle=True)
    return EnsembleSeries.from_results(config.time_grid, results, alpha=config.ci_alpha, label="dsmc", config=config)


def oracle_reference(series: EnsembleSeries) -> ReferenceMoments:
    """Ensemble-mean curve of an oracle run, usable as a reference."""
    return ReferenceMoments(ReferenceSource.ORACLE_RUN, series.time_grid, series.mean_flat())


def reference_for(config: ExperimentConfig) -> ReferenceMoments:
    if config.reference == "equilibrium":
        return equilibrium_moments(config.mixture)
    return hierarchy_moments(config.mixture, config.time_grid)


def table_errors(
    seed: int,
    m0: int = 10240,
    n_reductions: int = 10,
    schemes=tuple(ReductionScheme),
    moments=("central_heat_flux", "raw_heat_flux"),
    T: float = 1.0,
) -> dict[ReductionScheme, dict[str, float]]:
    """Largest group-averaged reduction error over the first ``n_reductions`` reductions.

    Single ensemble from a Maxwellian at rest with temperature ``T``; reduction
    at ``4 m0`` particles down to about ``m0 / 4``. Each scheme gets the same seed.
    """
    if n_reductions < 1:
        raise ParameterError("n_reductions must be >= 1")
    out = {}
    for scheme in schemes:
        scheme = ReductionScheme.parse(scheme)
        rng = RandomSource(seed)
        reducer = ReductionController(scheme, m0, keep_reports=True)
        state = sample_initial_state(MixtureSpec.maxwellian((0.0, 0.0, 0.0), T), m0, rng, reducer.trigger_count + 2)
        engine = CollisionEngine(rng, reducer=reducer, max_reductions=n_reductions)
        engine.run_until(state, math.inf)
        if reducer.count < n_reductions:
            raise SWPMError(f"only {reducer.count} reductions happened")
        out[scheme] = {w: float(np.nanmax([r.average_error(w) for r in reducer.reports])) for w in moments}
    return out
