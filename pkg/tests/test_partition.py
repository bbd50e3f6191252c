"""Geometric partition construction, weights, and cardinality scaling."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from fbmarkov import (
    AtomicMeasure,
    CapacityError,
    DomainError,
    GeometricPartition,
    HurstKernelParams,
    ParameterError,
    PowerLawMeasure,
    build_geometric_partition,
    compute_weights,
    partition_cardinality,
    partition_for_measure,
    sup_l2_error,
)

X_MAX_TARGET = 7.7426368268112706  # (1/0.01)^(2/4.5), mpmath
CELL_MASS_1_2 = 0.17034625276996375  # sin(.75 pi)/(pi .25) (2^.25 - 1), mpmath
BARYCENTER_1_2 = 1.457042701576649


class TestBuilder:
    def test_printed_formulas(self):
        part = build_geometric_partition(PowerLawMeasure(0.75), 0.01, c_alpha=1.0)
        assert part.n == 215
        assert part.ratio == pytest.approx(1.1, rel=1e-15)
        assert part.edges[0] == pytest.approx(1e-8, rel=1e-12)
        assert part.x_max >= X_MAX_TARGET
        # the last edge is the first geometric point at or above the target
        assert part.edges[-2] < X_MAX_TARGET <= part.edges[-1]

    def test_edges_in_geometric_progression(self):
        part = build_geometric_partition(PowerLawMeasure(0.6), 0.02)
        ratios = part.edges[1:] / part.edges[:-1]
        assert np.allclose(ratios, part.ratio, rtol=1e-12)

    def test_degenerate_eps_single_cell(self):
        part = build_geometric_partition(PowerLawMeasure(0.75), 0.9)
        assert part.n <= 2

    def test_nodes_inside_cells(self):
        for rule in ("barycenter", "geometric_midpoint", "left_edge"):
            part = build_geometric_partition(
                PowerLawMeasure(0.75), 0.03, node_rule=rule
            )
            assert np.all(part.nodes >= part.edges[:-1])
            assert np.all(part.nodes <= part.edges[1:])
            assert np.all(np.diff(part.nodes) > 0.0)
            assert np.all(part.weights > 0.0)
            assert part.x_min <= part.nodes[0] < part.nodes[-1] <= part.x_max

    def test_capacity_cap(self):
        with pytest.raises(CapacityError):
            build_geometric_partition(PowerLawMeasure(0.75), 1e-4, max_cells=100)

    def test_atomic_rejected(self):
        with pytest.raises(ParameterError):
            build_geometric_partition(AtomicMeasure.from_pairs([(1, 1)]), 0.1)

    def test_endpoint_overrides(self):
        part = build_geometric_partition(
            PowerLawMeasure(0.75), 0.01, x_min=1e-4, x_max=10.0
        )
        assert part.edges[0] == pytest.approx(1e-4)
        assert part.x_max >= 10.0


class TestCardinality:
    def test_matches_builder(self):
        for eps in (0.1, 0.03, 0.01, 0.003):
            part = build_geometric_partition(PowerLawMeasure(0.75), eps)
            assert partition_cardinality(eps, 0.75) == part.n

    def test_printed_example(self):
        assert partition_cardinality(0.01, 0.75, 1.0) == 215

    def test_monotone_in_eps(self):
        for eps in np.logspace(-4, -1, 7):
            assert partition_cardinality(eps / 2, 0.75) > partition_cardinality(
                eps, 0.75
            )

    def test_growth_rate(self):
        # N(eps) ~ c sqrt(1/eps) log(1/eps): regress after removing the log
        eps = np.logspace(-6, -1, 11)
        n = np.array([partition_cardinality(e, 0.75) for e in eps])
        x = np.log(1.0 / eps)
        slope = np.polyfit(x, np.log(n / x), 1)[0]
        assert 0.4 <= slope <= 0.6


class TestComputeWeights:
    def test_cell_mass_closed_form(self):
        nodes, weights = compute_weights(PowerLawMeasure(0.75), [1.0, 2.0])
        assert weights[0] == pytest.approx(CELL_MASS_1_2, rel=1e-12)
        assert nodes[0] == pytest.approx(BARYCENTER_1_2, rel=1e-12)

    def test_cell_mass_vs_quadrature(self):
        m = PowerLawMeasure(0.65)
        edges = np.array([0.1, 0.7, 2.0, 9.0])
        nodes, weights = compute_weights(m, edges)
        norm = math.sin(0.65 * math.pi) / math.pi
        for i in range(3):
            ref, _ = quad(
                lambda x: x ** -0.65 * norm, edges[i], edges[i + 1], epsrel=1e-12
            )
            assert weights[i] == pytest.approx(ref, rel=1e-10)

    def test_geometric_midpoint_rule(self):
        nodes, _ = compute_weights(
            PowerLawMeasure(0.75), [1.0, 2.0], node_rule="geometric_midpoint"
        )
        assert nodes[0] == pytest.approx(math.sqrt(2.0), rel=1e-15)

    def test_atoms_map_to_themselves(self):
        nodes, weights = compute_weights(
            AtomicMeasure.from_pairs([(1.0, 2.0)]), [0.5, 5.0]
        )
        assert list(nodes) == [1.0]
        assert list(weights) == [2.0]

    def test_degenerate_cell_rejected(self):
        with pytest.raises(DomainError):
            compute_weights(PowerLawMeasure(0.75), [1.0, 1.0])

    def test_unknown_rule(self):
        with pytest.raises(ParameterError):
            compute_weights(PowerLawMeasure(0.75), [1.0, 2.0], node_rule="median")


class TestInvariants:
    def test_mass_consistency(self):
        part = build_geometric_partition(PowerLawMeasure(0.75), 0.01)
        a = 0.75
        norm = math.sin(a * math.pi) / math.pi
        total = norm / (1 - a) * (part.x_max ** (1 - a) - part.x_min ** (1 - a))
        assert part.total_mass == pytest.approx(total, rel=1e-10)

    def test_barycenter_first_moment_exact(self):
        part = build_geometric_partition(PowerLawMeasure(0.8), 0.05)
        norm = math.sin(0.8 * math.pi) / math.pi
        for i in range(0, part.n, 37):
            ref, _ = quad(
                lambda x: x * x ** -0.8 * norm,
                part.edges[i],
                part.edges[i + 1],
                epsrel=1e-13,
            )
            assert part.weights[i] * part.nodes[i] == pytest.approx(ref, rel=1e-10)

    def test_refinement_monotonicity(self):
        params = HurstKernelParams.from_alpha(0.75)
        grid = np.linspace(0.125, 1.0, 8)
        sups = []
        for eps in (0.1, 0.03, 0.01):
            part = build_geometric_partition(PowerLawMeasure(0.75), eps)
            sups.append(sup_l2_error(params, part, grid).sup_l2_error)
        assert sups[0] > sups[1] > sups[2]


class TestDispatchAndCsv:
    def test_partition_for_measure_atomic(self):
        part = partition_for_measure(AtomicMeasure.from_pairs([(1.0, 1.0), (3.0, 0.5)]))
        assert part.n == 2
        assert part.edges is None

    def test_partition_for_measure_needs_eps(self):
        with pytest.raises(ParameterError):
            partition_for_measure(PowerLawMeasure(0.75))

    def test_csv_round_trip(self, tmp_path):
        part = build_geometric_partition(PowerLawMeasure(0.75), 0.1)
        path = tmp_path / "part.csv"
        part.write_csv(path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "index,eta,c,cell_lo,cell_hi"
        assert len(rows) == part.n + 1
        first = rows[1].split(",")
        assert float(first[1]) == pytest.approx(part.nodes[0], rel=1e-15)
        assert float(first[2]) == pytest.approx(part.weights[0], rel=1e-15)

    def test_immutable_arrays(self):
        part = build_geometric_partition(PowerLawMeasure(0.75), 0.1)
        with pytest.raises(ValueError):
            part.nodes[0] = 99.0
