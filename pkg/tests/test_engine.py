from __future__ import annotations

import random

import pytest

from cascadekit.engine import (
    CascadeConfig,
    ScalingSpec,
    charged_gmacs_total,
    default_grid,
    estimate_scaling_cost,
    evaluate,
    route,
    sweep,
    sweep_kpass,
)
from cascadekit.errors import ChainMismatchError, EmptyInputError
from cascadekit.records import AlignedRecordSet, AlignedRow

from conftest import make_profile, random_aligned

LITTLE = make_profile("net-a", 1.0)
BIG = make_profile("net-b", 10.0)
TINY = make_profile("net-0", 0.2)


# Independent reference interpreter of the gate, written from its definition
# and never from the engine: stage i answers iff its confidence >= T[i] and no
# earlier stage answered; the last stage answers unconditionally; every
# reached stage is charged.
def route_reference(outputs, thresholds):
    for i, threshold in enumerate(thresholds):
        if outputs[i][1] >= threshold:
            return i
    return len(outputs) - 1


def evaluate_reference(aligned, macs, thresholds):
    stages, n_correct, charged = [], 0, 0.0
    for row in aligned.rows:
        stage = route_reference(row.outputs, thresholds)
        stages.append(stage)
        if row.outputs[stage][0] == row.true_label:
            n_correct += 1
        charged += sum(macs[: stage + 1])
    return stages, n_correct, charged / len(aligned.rows)


def _pair_aligned(rows):
    """rows: (little_conf, little_correct, big_correct); labels derived."""
    built = []
    for i, (conf, lc, bc) in enumerate(rows):
        built.append(
            AlignedRow(f"s{i}", 1, ((1 if lc else 2, conf), (1 if bc else 3, 0.8)))
        )
    return AlignedRecordSet("d", (LITTLE, BIG), tuple(built))


class TestRoute:
    def _config(self, *thresholds, chain=(LITTLE, BIG)):
        return CascadeConfig(chain=tuple(chain), thresholds=tuple(thresholds))

    def test_tie_answers_at_cheaper_stage(self):
        row = AlignedRow("s", 1, ((4, 0.9), (5, 0.99)))
        assert route(row, self._config(0.9)) == (0, 4)

    def test_zero_threshold_never_forwards(self):
        rng = random.Random(0)
        for _ in range(50):
            conf = round(rng.random(), 6)
            row = AlignedRow("s", 1, ((4, conf), (5, 0.99)))
            assert route(row, self._config(0.0))[0] == 0

    def test_three_stage_hand_case(self):
        # (0.5, 0.8) against thresholds (0.74, 0.26): declines, then answers.
        row = AlignedRow("s", 1, ((4, 0.5), (5, 0.8), (6, 0.99)))
        config = self._config(0.74, 0.26, chain=(TINY, LITTLE, BIG))
        assert route(row, config) == (1, 5)

    def test_final_stage_unconditional(self):
        row = AlignedRow("s", 1, ((4, 0.1), (5, 0.1), (6, 0.1)))
        config = self._config(0.9, 0.9, chain=(TINY, LITTLE, BIG))
        assert route(row, config) == (2, 6)

    def test_arity_mismatch(self):
        row = AlignedRow("s", 1, ((4, 0.5),))
        with pytest.raises(ChainMismatchError):
            route(row, self._config(0.5))

    def test_matches_reference_on_random_rows(self):
        rng = random.Random(1)
        chain = (TINY, LITTLE, BIG)
        for _ in range(300):
            outputs = tuple((rng.randrange(5), round(rng.random(), 2)) for _ in chain)
            thresholds = tuple(round(rng.random(), 2) for _ in range(2))
            row = AlignedRow("s", 1, outputs)
            config = CascadeConfig(chain=chain, thresholds=thresholds)
            assert route(row, config)[0] == route_reference(outputs, thresholds)


class TestConfigValidation:
    def test_threshold_arity(self):
        with pytest.raises(ValueError, match="thresholds"):
            CascadeConfig(chain=(LITTLE, BIG), thresholds=(0.5, 0.5))

    def test_threshold_range(self):
        with pytest.raises(ValueError, match="outside"):
            CascadeConfig(chain=(LITTLE, BIG), thresholds=(1.5,))

    def test_chain_length(self):
        with pytest.raises(ValueError, match="at least 2"):
            CascadeConfig(chain=(LITTLE,), thresholds=())


class TestEvaluate:
    def test_hand_enumerated_pair(self):
        aligned = _pair_aligned(
            [(0.9, True, True), (0.6, False, True), (0.4, False, True), (0.95, True, False)]
        )
        point = evaluate(aligned, CascadeConfig(chain=(LITTLE, BIG), thresholds=(0.5,)))
        assert point.accuracy == 0.75
        assert point.expected_macs == 1.0 + (1 / 4) * 10.0
        assert point.stage_counts == (3, 1)
        assert point.stage_fractions == (0.75, 0.25)
        assert point.reached_counts == (4, 1)

    def test_zero_threshold_is_little_alone(self):
        rng = random.Random(2)
        aligned = random_aligned(rng, 321, [LITTLE, BIG])
        point = evaluate(aligned, CascadeConfig(chain=(LITTLE, BIG), thresholds=(0.0,)))
        assert point.n_correct == aligned.model_correct_count(0)
        assert point.expected_macs == LITTLE.macs_per_sample
        assert point.stage_fractions == (1.0, 0.0)

    def test_threshold_above_all_confidences_is_big_plus_overhead(self):
        aligned = _pair_aligned([(0.3, False, True), (0.6, True, False), (0.2, False, True)])
        point = evaluate(aligned, CascadeConfig(chain=(LITTLE, BIG), thresholds=(1.0,)))
        assert point.n_correct == aligned.model_correct_count(1)
        assert point.expected_macs == LITTLE.macs_per_sample + BIG.macs_per_sample
        assert point.stage_fractions == (0.0, 1.0)

    def test_matches_reference_interpreter(self):
        rng = random.Random(3)
        for _ in range(30):
            k = rng.choice([2, 3])
            chain = (TINY, LITTLE, BIG)[-k:]
            aligned = random_aligned(rng, rng.randrange(1, 200), list(chain), tie_pool=[0.5])
            thresholds = tuple(rng.choice([0.0, 0.5, round(rng.random(), 2), 1.0]) for _ in range(k - 1))
            point = evaluate(aligned, CascadeConfig(chain=chain, thresholds=thresholds))
            macs = [m.macs_per_sample for m in chain]
            stages, n_correct, expected = evaluate_reference(aligned, macs, thresholds)
            assert point.n_correct == n_correct
            counts = [stages.count(i) for i in range(k)]
            assert list(point.stage_counts) == counts
            assert point.expected_macs == pytest.approx(expected, rel=1e-12)

    def test_cost_identity_per_row_vs_aggregate(self):
        rng = random.Random(4)
        aligned = random_aligned(rng, 777, [LITTLE, BIG])
        point = evaluate(aligned, CascadeConfig(chain=(LITTLE, BIG), thresholds=(0.7,)))
        per_row = sum(
            sum((LITTLE.macs_per_sample, BIG.macs_per_sample)[: stage + 1])
            for stage in (
                route(row, CascadeConfig(chain=(LITTLE, BIG), thresholds=(0.7,)))[0]
                for row in aligned.rows
            )
        ) / len(aligned.rows)
        assert point.expected_macs == pytest.approx(per_row, rel=1e-9)

    def test_chain_mismatch(self):
        rng = random.Random(5)
        aligned = random_aligned(rng, 10, [LITTLE, BIG])
        config = CascadeConfig(chain=(BIG, LITTLE), thresholds=(0.5,))
        with pytest.raises(ChainMismatchError):
            evaluate(aligned, config)

    def test_empty_aligned_set(self):
        aligned = AlignedRecordSet("d", (LITTLE, BIG), ())
        with pytest.raises(EmptyInputError):
            evaluate(aligned, CascadeConfig(chain=(LITTLE, BIG), thresholds=(0.5,)))


class TestSweep:
    def test_default_grid_is_50_evenly_spaced(self):
        grid = default_grid()
        assert len(grid) == 50
        assert grid[0] == 0.0 and grid[-1] == 1.0
        steps = {round(b - a, 12) for a, b in zip(grid, grid[1:])}
        assert len(steps) == 1

    def test_endpoints(self):
        rng = random.Random(6)
        aligned = random_aligned(rng, 100, [LITTLE, BIG])
        curve = sweep(aligned, (LITTLE, BIG), [0.0, 1.0])
        first, last = curve.points
        assert first.n_correct == aligned.model_correct_count(0)
        assert first.expected_macs == LITTLE.macs_per_sample
        assert last.stage_fractions[1] == 1.0 - sum(
            1 for r in aligned.rows if r.outputs[0][1] >= 1.0
        ) / len(aligned)

    def test_forwarded_fraction_is_cdf_below_threshold(self):
        rng = random.Random(7)
        aligned = random_aligned(rng, 400, [LITTLE, BIG], tie_pool=[0.25, 0.5])
        grid = [i / 20 for i in range(21)]
        curve = sweep(aligned, (LITTLE, BIG), grid)
        for threshold, point in zip(grid, curve.points):
            cdf = sum(1 for r in aligned.rows if r.outputs[0][1] < threshold) / len(aligned)
            assert point.stage_fractions[1] == cdf

    def test_cost_monotone_along_grid(self):
        rng = random.Random(8)
        aligned = random_aligned(rng, 250, [LITTLE, BIG])
        curve = sweep(aligned, (LITTLE, BIG), default_grid())
        costs = [p.expected_macs for p in curve.points]
        assert all(a <= b for a, b in zip(costs, costs[1:]))

    def test_grid_validation(self):
        rng = random.Random(9)
        aligned = random_aligned(rng, 10, [LITTLE, BIG])
        with pytest.raises(EmptyInputError):
            sweep(aligned, (LITTLE, BIG), [])
        with pytest.raises(ValueError, match="sorted"):
            sweep(aligned, (LITTLE, BIG), [0.5, 0.1])
        with pytest.raises(ValueError, match="outside"):
            sweep(aligned, (LITTLE, BIG), [0.5, 1.5])


class TestSweepKPass:
    def _aligned(self, rng, n=150):
        return random_aligned(rng, n, [TINY, LITTLE, BIG], tie_pool=[0.5])

    def test_first_gate_zero_is_tiny_alone(self):
        rng = random.Random(10)
        aligned = self._aligned(rng)
        points = sweep_kpass(aligned, (TINY, LITTLE, BIG), [[0.0], [0.0, 0.5, 1.0]])
        for point in points:
            assert point.n_correct == aligned.model_correct_count(0)
            assert point.expected_macs == TINY.macs_per_sample
            assert point.stage_fractions == (1.0, 0.0, 0.0)

    def test_second_gate_zero_reduces_to_two_pass(self):
        rng = random.Random(11)
        aligned = self._aligned(rng)
        grid = [i / 10 for i in range(11)]
        kpass = sweep_kpass(aligned, (TINY, LITTLE, BIG), [grid, [0.0]])
        two_pass = sweep(aligned.project(["net-0", "net-a"]), (TINY, LITTLE), grid)
        for kp, tp in zip(kpass, two_pass.points):
            assert kp.thresholds[0] == tp.thresholds[0]
            assert kp.n_correct == tp.n_correct
            assert kp.expected_macs == tp.expected_macs
            assert kp.stage_fractions[:2] == tp.stage_fractions
            assert kp.stage_fractions[2] == 0.0

    def test_row_major_order_and_reference(self):
        rng = random.Random(12)
        aligned = self._aligned(rng, 80)
        g1, g2 = [0.2, 0.8], [0.1, 0.9]
        points = sweep_kpass(aligned, (TINY, LITTLE, BIG), [g1, g2])
        macs = [m.macs_per_sample for m in (TINY, LITTLE, BIG)]
        expected_order = [(a, b) for a in g1 for b in g2]
        assert [p.thresholds for p in points] == [tuple(t) for t in expected_order]
        for point in points:
            _, n_correct, expected = evaluate_reference(aligned, macs, point.thresholds)
            assert point.n_correct == n_correct
            assert point.expected_macs == pytest.approx(expected, rel=1e-12)

    def test_grid_arity(self):
        rng = random.Random(13)
        aligned = self._aligned(rng, 10)
        with pytest.raises(ValueError, match="grids"):
            sweep_kpass(aligned, (TINY, LITTLE, BIG), [[0.5]])


class TestScalingEstimator:
    def test_identity(self):
        assert estimate_scaling_cost(ScalingSpec(1, 1, 1)) == 1.0

    def test_doubling_everything_is_32x(self):
        assert estimate_scaling_cost(ScalingSpec(2, 2, 2)) == 32.0

    def test_family_extremes_agree_in_order_of_magnitude(self):
        # Largest vs smallest family member: ratios 2.7 / 2.0 / 3.1 => ~90x,
        # the same order as the measured ~96x cost ratio.
        estimated = estimate_scaling_cost(ScalingSpec(2.7, 2.0, 3.1))
        assert estimated == pytest.approx(90.396, rel=1e-6)
        measured = 37.8 / 0.39
        assert 0.5 < estimated / measured < 2.0

    def test_coefficient_ratio_scales_linearly(self):
        assert estimate_scaling_cost(ScalingSpec(1, 1, 1, c_ratio=2.5)) == 2.5

    def test_rejects_nonpositive_ratio(self):
        with pytest.raises(ValueError):
            ScalingSpec(0.0, 1, 1)


def test_charged_total_is_fixed_order_sum():
    assert charged_gmacs_total([1.0, 10.0], [4, 1]) == 1.0 * 4 + 10.0 * 1
