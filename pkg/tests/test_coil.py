import warnings

import numpy as np
import pytest

from coilsim.coil import coil_value, coil_value_direct, coil_vector, expected_stage_cost
from coilsim.errors import AllocationError, DegeneratePriorityError
from coilsim.network import Allocation
from coilsim.plant import SubsystemModel

SQRT5 = np.sqrt(5.0)
COIL0 = (47 + 21 * SQRT5) / 2  # Gamma * (h(Pbar) - Pbar) for the scalar fixture


@pytest.fixture(scope="module")
def scalar_model():
    return SubsystemModel.from_scalars(2, 1, 1, 1, 1, 1, 1)


@pytest.fixture(scope="module")
def scalar_pair(scalar_model):
    return [scalar_model, SubsystemModel.from_scalars(2, 1, 1, 1, 1, 1, 1)]


class TestCoilValue:
    def test_age_zero(self, scalar_model):
        assert coil_value(scalar_model, 0) == pytest.approx(COIL0, rel=1e-10)

    def test_age_one_is_five_times_age_zero(self, scalar_model):
        # scalar algebra: h^2 - Pbar = 5 (h - Pbar) at this fixed point
        assert coil_value(scalar_model, 1) == pytest.approx(5 * COIL0, rel=1e-10)

    def test_degenerate_weight_raises(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            degenerate = SubsystemModel.from_scalars(0.5, 1, 1, 1, 1, 0, 1)
        assert degenerate.Gamma[0, 0] == 0.0
        with pytest.raises(DegeneratePriorityError):
            coil_value(degenerate, 0)

    def test_cache_matches_direct_recompute(self, scalar_model):
        for t in range(0, 25):
            assert coil_value(scalar_model, t) == pytest.approx(
                coil_value_direct(scalar_model, t), rel=1e-12
            )

    def test_monotone_in_age(self):
        rng = np.random.default_rng(21)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for _ in range(10):
                a = rng.uniform(1.05, 2.2)
                model = SubsystemModel.from_scalars(
                    a, 1.0, 1.0, rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0),
                    rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0),
                )
                values = [coil_value(model, t) for t in range(61)]
                assert all(b >= a_ for a_, b in zip(values, values[1:]))

    def test_vector_floors_degenerate_priorities(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            degenerate = SubsystemModel.from_scalars(0.5, 1, 1, 1, 1, 0, 1)
        out = coil_vector([degenerate], [0])
        assert out[0] == 1e-12


class TestExpectedStageCost:
    def test_empty_allocation(self, scalar_model):
        got = expected_stage_cost(
            [scalar_model], [0], Allocation(pairs=()), np.array([[0.5]])
        )
        want = scalar_model.tr_PiW + scalar_model.gamma_h_trace(1)
        assert got == pytest.approx(want, rel=1e-12)

    def test_perfect_link_collapses_to_receipt(self, scalar_model):
        got = expected_stage_cost(
            [scalar_model], [0], Allocation(pairs=((0, 0),)), np.array([[1.0]])
        )
        want = scalar_model.tr_PiW + float(
            np.trace(scalar_model.Gamma @ scalar_model.P_bar)
        )
        assert got == pytest.approx(want, rel=1e-12)

    def test_matches_bernoulli_enumeration(self, scalar_pair):
        # law of total expectation over the single allocated link's outcome
        q = np.array([[0.4], [0.44]])
        ages = [2, 5]
        models = scalar_pair
        for winner in (0, 1):
            alloc = Allocation(pairs=((winner, 0),))
            got = expected_stage_cost(models, ages, alloc, q)
            cost_if = {}
            for success in (True, False):
                total = sum(m.tr_PiW for m in models)
                for i, m in enumerate(models):
                    if i == winner and success:
                        total += float(np.trace(m.Gamma @ m.P_bar))
                    else:
                        total += m.gamma_h_trace(ages[i] + 1)
                cost_if[success] = total
            want = q[winner, 0] * cost_if[True] + (1 - q[winner, 0]) * cost_if[False]
            assert got == pytest.approx(want, rel=1e-12)

    def test_identity_with_coil_value(self, scalar_model):
        # E(not allocated) - E(allocated with q = 1) equals the CoIL
        for t in range(11):
            e0 = scalar_model.gamma_h_trace(t + 1)
            e1 = float(np.trace(scalar_model.Gamma @ scalar_model.P_bar))
            assert e0 - e1 == pytest.approx(coil_value(scalar_model, t), abs=1e-9)

    def test_decreases_when_allocated_quality_improves(self, scalar_pair):
        ages = [3, 3]
        alloc = Allocation(pairs=((0, 0),))
        lo = expected_stage_cost(scalar_pair, ages, alloc, np.array([[0.3], [0.5]]))
        hi = expected_stage_cost(scalar_pair, ages, alloc, np.array([[0.9], [0.5]]))
        assert hi < lo

    def test_invalid_allocation_rejected(self, scalar_pair):
        bad = Allocation(pairs=((0, 0), (1, 0)))
        with pytest.raises(AllocationError):
            expected_stage_cost(scalar_pair, [0, 0], bad, np.array([[0.4], [0.44]]))
