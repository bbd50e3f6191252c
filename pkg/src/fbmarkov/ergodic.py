"""Time averages along simulated paths against Gaussian expectations.

For a square-integrable kernel the normalized output V(t)/a, with
a = ||h||_L2, converges in distribution to a standard normal, and time
averages (1/t) integral of phi(V(s)/a) ds converge to E[phi(N)] regardless
of the starting vector.  This module runs that experiment for a fixed
benchmark family of phi with exact targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from concurrent.futures import ThreadPoolExecutor

from .engine import PathSample, replica_seeds, simulate_ensemble
from .errors import NotSquareIntegrableError, ParameterError
from .kernel import SpectralMeasure, check_admissibility, l2_norm
from .partition import partition_for_measure

__all__ = [
    "PhiSpec",
    "PHI_NAMES",
    "make_phi",
    "gaussian_expectation",
    "ErgodicResult",
    "time_average",
    "ergodic_experiment",
]

PHI_NAMES = ("square", "abs", "positive_indicator", "threshold", "cos")


@dataclass(frozen=True)
class PhiSpec:
    """A test function with its exact standard-normal expectation."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    target: Optional[float]


def make_phi(name: str, c: Optional[float] = None) -> PhiSpec:
    """Member of the benchmark family; ``threshold`` needs its level c."""
    if name == "square":
        return PhiSpec("square", np.square, 1.0)
    if name == "abs":
        return PhiSpec("abs", np.abs, math.sqrt(2.0 / math.pi))
    if name == "positive_indicator":
        return PhiSpec(
            "positive_indicator", lambda z: (z > 0.0).astype(float), 0.5
        )
    if name == "cos":
        return PhiSpec("cos", np.cos, math.exp(-0.5))
    if name == "threshold":
        if c is None:
            raise ParameterError("threshold phi needs its level c")
        tail = 0.5 * math.erfc(c / math.sqrt(2.0))
        return PhiSpec(
            f"threshold({c:g})", lambda z: (z > c).astype(float), tail
        )
    raise ParameterError(f"unknown phi {name!r}, expected one of {PHI_NAMES}")


def gaussian_expectation(phi: PhiSpec) -> float:
    """E[phi(N)] for a standard normal N (closed form for the family)."""
    if phi.target is None:
        raise ParameterError(f"phi {phi.name!r} has no closed-form expectation")
    return phi.target


@dataclass(frozen=True)
class ErgodicResult:
    """Running averages, final estimate and its distance to the target."""

    horizon: float
    dt: float
    phi: str
    checkpoint_times: np.ndarray
    running_average: np.ndarray  # (replicas, n_checkpoints)
    final_estimate: float
    target: Optional[float]
    stderr: Optional[float]
    replicas: int
    seed: Optional[int]

    def __post_init__(self) -> None:
        if self.stderr is not None and self.replicas < 2:
            raise ParameterError("a standard error needs at least two replicas")

    @property
    def z_score(self) -> Optional[float]:
        if self.target is None or not self.stderr:
            return None
        return (self.final_estimate - self.target) / self.stderr

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("replica,t,running_average\n")
            for r in range(self.running_average.shape[0]):
                for t, v in zip(self.checkpoint_times, self.running_average[r]):
                    fh.write(f"{r},{t:.17g},{v:.17g}\n")
            fh.write("estimate,stderr,target,z_score\n")
            stderr = "" if self.stderr is None else f"{self.stderr:.17g}"
            target = "" if self.target is None else f"{self.target:.17g}"
            z = self.z_score
            fh.write(
                f"{self.final_estimate:.17g},{stderr},{target},"
                f"{'' if z is None else format(z, '.17g')}\n"
            )


def _checkpoint_indices(n_points: int, n_checkpoints: int = 32) -> np.ndarray:
    # log-spaced indices over the positive-time part of the grid
    if n_points < 2:
        raise ParameterError("a time average needs at least two grid points")
    raw = np.unique(
        np.round(
            np.logspace(0.0, math.log10(n_points - 1), n_checkpoints)
        ).astype(int)
    )
    return raw


def _running_averages(times: np.ndarray, values: np.ndarray, phi: PhiSpec, a: float):
    # trapezoidal cumulative integral of phi(V/a), divided by elapsed time
    f = phi.fn(values / a)
    dt = np.diff(times)
    increments = 0.5 * (f[..., 1:] + f[..., :-1]) * dt
    cumulative = np.cumsum(increments, axis=-1)
    idx = _checkpoint_indices(times.size)
    return times[idx], cumulative[..., idx - 1] / times[idx]


def time_average(path: PathSample, phi: PhiSpec, a: float) -> ErgodicResult:
    """Running time average of phi(V/a) along one path."""
    if a <= 0.0:
        raise ParameterError(f"normalization must be positive, got a={a}")
    check_times, running = _running_averages(path.times, path.values, phi, a)
    return ErgodicResult(
        horizon=float(path.times[-1]),
        dt=float(path.times[1] - path.times[0]),
        phi=phi.name,
        checkpoint_times=check_times,
        running_average=running[None, :],
        final_estimate=float(running[-1]),
        target=phi.target,
        stderr=None,
        replicas=1,
        seed=path.seed,
    )


def ergodic_experiment(
    measure: SpectralMeasure,
    phi: PhiSpec,
    T: float,
    dt: float,
    replicas: int = 8,
    seed: int = 0,
    y0=None,
    max_workers: int = 1,
) -> ErgodicResult:
    """Independent-replica estimate of lim (1/t) integral phi(V(s)/a) ds.

    Only square-integrable kernels are accepted; the fractional power-law
    measure is refused with its admissibility report rather than
    extrapolated.  The starting vector y0 (default zero) is forgotten in
    the limit, which is part of what the tests assert.  Replicas carry
    seeds derived from the master seed by index, so the result is the same
    however they are spread over workers.
    """
    if replicas < 2:
        raise ParameterError("the experiment needs at least two replicas")
    try:
        a = l2_norm(measure)
    except NotSquareIntegrableError as exc:
        report = check_admissibility(measure)
        raise NotSquareIntegrableError(
            f"{exc} (admissibility: condition_10={report.condition_10}, "
            f"condition_prop2={report.condition_prop2}, "
            f"l2_norm_finite={report.l2_norm_finite})"
        ) from exc
    partition = partition_for_measure(measure)
    times, values = _run_replicas(
        partition, T, dt, replicas, seed, y0, max(1, max_workers)
    )
    check_times, running = _running_averages(times, values, phi, a)
    finals = running[:, -1]
    estimate = float(np.mean(finals))
    stderr = float(np.std(finals, ddof=1) / math.sqrt(replicas))
    return ErgodicResult(
        horizon=float(T),
        dt=float(dt),
        phi=phi.name,
        checkpoint_times=check_times,
        running_average=running,
        final_estimate=estimate,
        target=phi.target,
        stderr=stderr,
        replicas=replicas,
        seed=seed,
    )


def _run_replicas(partition, T, dt, replicas, seed, y0, max_workers):
    seeds = replica_seeds(seed, replicas)
    if max_workers <= 1:
        return simulate_ensemble(
            partition, T, dt, replicas, scheme="exact", seed=seed, y0=y0, seeds=seeds
        )
    bounds = np.linspace(0, replicas, max_workers + 1).astype(int)
    chunks = [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    def run(chunk):
        a, b = chunk
        return simulate_ensemble(
            partition, T, dt, b - a, scheme="exact", y0=y0, seeds=seeds[a:b]
        )

    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(run, chunks))
    times = parts[0][0]
    values = np.vstack([v for _, v in parts])
    return times, values
