"""Geometric discretization of a spectral measure into node/weight pairs.

The simulator replaces the continuum of relaxation rates by finitely many
nodes eta_i with weights c_i, so that sum_i c_i exp(-eta_i u) approximates
the kernel.  For the power-law measure the nodes live on a geometric grid
of ratio r = 1 + c_alpha * sqrt(eps) covering the compact

    [eps^(1/(1-alpha)), (1/eps)^(2/(2*alpha+3))],

which yields a cell count N(eps) growing like sqrt(1/eps) * log(1/eps).
Weights are the measure of each cell (closed form); nodes default to the
cell barycenter, which matches the first moment of the cell exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CapacityError, DomainError, ParameterError
from .kernel import AtomicMeasure, PowerLawMeasure, SpectralMeasure

__all__ = [
    "GeometricPartition",
    "NODE_RULES",
    "build_geometric_partition",
    "partition_cardinality",
    "compute_weights",
    "partition_for_measure",
]

NODE_RULES = ("barycenter", "geometric_midpoint", "left_edge")

DEFAULT_MAX_CELLS = 10 ** 6


@dataclass(frozen=True)
class GeometricPartition:
    """Nodes, weights and cell geometry of a discretized measure.

    ``edges`` has length n+1 for a cell-based partition and is None when the
    partition is the exact image of an atomic measure (one node per atom,
    no cells).  Arrays are frozen after construction.
    """

    nodes: np.ndarray
    weights: np.ndarray
    ratio: Optional[float]
    x_min: float
    x_max: float
    node_rule: str
    edges: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise ParameterError("nodes and weights must be equal-length 1-d arrays")
        if np.any(np.diff(nodes) <= 0.0):
            raise ParameterError("nodes must be strictly increasing")
        if np.any(weights <= 0.0):
            raise ParameterError("weights must be strictly positive")
        if self.edges is not None:
            edges = np.asarray(self.edges, dtype=float)
            object.__setattr__(self, "edges", edges)
            if edges.size != nodes.size + 1:
                raise ParameterError("edges must have one more entry than nodes")
            edges.flags.writeable = False
        nodes.flags.writeable = False
        weights.flags.writeable = False

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @classmethod
    def from_atoms(cls, measure: AtomicMeasure) -> "GeometricPartition":
        """Exact partition of an atomic measure: nodes are the atoms."""
        locs = np.asarray(measure.locations)
        return cls(
            nodes=locs,
            weights=np.asarray(measure.masses),
            ratio=None,
            x_min=float(locs[0]),
            x_max=float(locs[-1]),
            node_rule="atoms",
        )

    def write_csv(self, path) -> None:
        """Write `index, eta, c, cell_lo, cell_hi` rows (atoms repeat eta)."""
        with open(path, "w") as fh:
            fh.write("index,eta,c,cell_lo,cell_hi\n")
            for i in range(self.n):
                lo, hi = (
                    (self.edges[i], self.edges[i + 1])
                    if self.edges is not None
                    else (self.nodes[i], self.nodes[i])
                )
                fh.write(
                    f"{i},{self.nodes[i]:.17g},{self.weights[i]:.17g},"
                    f"{lo:.17g},{hi:.17g}\n"
                )


def _compact_bounds(eps: float, alpha: float) -> tuple:
    x_min = eps ** (1.0 / (1.0 - alpha))
    x_max = (1.0 / eps) ** (2.0 / (2.0 * alpha + 3.0))
    return x_min, x_max


def _cell_count(x_min: float, x_max: float, ratio: float) -> int:
    if x_max <= x_min:
        return 1
    return max(1, int(math.ceil(math.log(x_max / x_min) / math.log(ratio))))


def _validate_build_args(eps: float, alpha: float, c_alpha: float) -> None:
    if not (0.0 < eps < 1.0):
        raise ParameterError(f"target precision must lie in (0, 1), got eps={eps}")
    if not (0.5 < alpha < 1.0):
        raise ParameterError(f"partition requires 1/2 < alpha < 1, got {alpha}")
    if c_alpha <= 0.0:
        raise ParameterError(f"ratio constant must be positive, got {c_alpha}")


def partition_cardinality(
    eps: float,
    alpha: float,
    c_alpha: float = 1.0,
    x_min: Optional[float] = None,
    x_max: Optional[float] = None,
) -> int:
    """Cell count the builder would produce, without building it."""
    _validate_build_args(eps, alpha, c_alpha)
    lo, hi = _compact_bounds(eps, alpha)
    lo = lo if x_min is None else x_min
    hi = hi if x_max is None else x_max
    ratio = 1.0 + c_alpha * math.sqrt(eps)
    return _cell_count(lo, hi, ratio)


def build_geometric_partition(
    measure: PowerLawMeasure,
    eps: float,
    c_alpha: float = 1.0,
    node_rule: str = "barycenter",
    x_min: Optional[float] = None,
    x_max: Optional[float] = None,
    max_cells: int = DEFAULT_MAX_CELLS,
) -> GeometricPartition:
    """Build the geometric partition of the power-law measure for target eps.

    Edges are x_min * r^k with r = 1 + c_alpha * sqrt(eps); the last edge is
    the smallest geometric point at or above the compact's upper endpoint.
    Both endpoints can be overridden for tuning experiments.
    """
    if not isinstance(measure, PowerLawMeasure):
        raise ParameterError(
            "geometric partitions are built for power-law measures; atomic "
            "measures are exactly representable, use GeometricPartition.from_atoms"
        )
    _validate_build_args(eps, measure.alpha, c_alpha)
    lo_default, hi_default = _compact_bounds(eps, measure.alpha)
    lo = lo_default if x_min is None else float(x_min)
    hi = hi_default if x_max is None else float(x_max)
    if lo <= 0.0 or hi <= 0.0:
        raise ParameterError("compact endpoints must be positive")
    ratio = 1.0 + c_alpha * math.sqrt(eps)
    n_cells = _cell_count(lo, hi, ratio)
    if n_cells > max_cells:
        raise CapacityError(
            f"partition would need {n_cells} cells, above the cap {max_cells}; "
            "raise max_cells or loosen eps"
        )
    edges = lo * ratio ** np.arange(n_cells + 1)
    nodes, weights, edges = _power_law_cells(measure, edges, node_rule)
    return GeometricPartition(
        nodes=nodes,
        weights=weights,
        ratio=ratio,
        x_min=float(edges[0]),
        x_max=float(edges[-1]),
        node_rule=node_rule,
        edges=edges,
    )


def compute_weights(
    measure: SpectralMeasure,
    edges,
    node_rule: str = "barycenter",
) -> tuple:
    """Node/weight pairs for the given cell boundaries.

    Power-law cells get their closed-form measure mass and the node demanded
    by ``node_rule``; atomic measures ignore the edges and map atoms to
    themselves.  Returns (nodes, weights) as arrays.
    """
    if isinstance(measure, AtomicMeasure):
        return np.asarray(measure.locations), np.asarray(measure.masses)
    edges = np.asarray(edges, dtype=float)
    nodes, weights, _ = _power_law_cells(measure, edges, node_rule)
    return nodes, weights


def _power_law_cells(
    measure: PowerLawMeasure, edges: np.ndarray, node_rule: str
) -> tuple:
    if node_rule not in NODE_RULES:
        raise ParameterError(
            f"unknown node rule {node_rule!r}, expected one of {NODE_RULES}"
        )
    if edges.ndim != 1 or edges.size < 2:
        raise ParameterError("need at least two cell boundaries")
    if edges[0] <= 0.0:
        raise DomainError("cell boundaries must be strictly positive")
    if np.any(np.diff(edges) <= 0.0):
        raise DomainError("cell boundaries must be strictly increasing")

    a = measure.alpha
    norm = measure.normalization
    lo, hi = edges[:-1], edges[1:]
    # cell mass: integral of x^-a dx * norm = norm/(1-a) * (hi^(1-a) - lo^(1-a))
    weights = norm / (1.0 - a) * (hi ** (1.0 - a) - lo ** (1.0 - a))
    if node_rule == "barycenter":
        # first moment / mass, both in closed form
        first = norm / (2.0 - a) * (hi ** (2.0 - a) - lo ** (2.0 - a))
        with np.errstate(invalid="ignore", divide="ignore"):
            nodes = first / weights
    elif node_rule == "geometric_midpoint":
        nodes = np.sqrt(lo * hi)
    else:
        nodes = lo.copy()

    keep = weights > 0.0
    if not np.all(keep):
        # merge zero-mass cells into their successor: total mass is unchanged
        warnings.warn(
            f"dropping {int(np.sum(~keep))} zero-mass cells from the partition",
            RuntimeWarning,
            stacklevel=3,
        )
        nodes, weights = nodes[keep], weights[keep]
        edges = np.append(lo[keep], hi[-1])
    return nodes, weights, edges


def partition_for_measure(
    measure: SpectralMeasure,
    eps: Optional[float] = None,
    c_alpha: float = 1.0,
    node_rule: str = "barycenter",
    x_min: Optional[float] = None,
    x_max: Optional[float] = None,
) -> GeometricPartition:
    """Dispatch: atoms map to themselves, power laws need a target eps."""
    if isinstance(measure, AtomicMeasure):
        return GeometricPartition.from_atoms(measure)
    if eps is None:
        raise ParameterError("a power-law measure needs a target precision eps")
    return build_geometric_partition(
        measure, eps, c_alpha=c_alpha, node_rule=node_rule, x_min=x_min, x_max=x_max
    )
