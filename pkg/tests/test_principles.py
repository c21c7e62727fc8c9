# Standard library imports
from dataclasses import dataclass

# Third-party imports
import numpy as np
import pytest

# Local imports
from src.settings import settings
from src.linalg import PreconditionError
from src.mfunc import (Const, Entrywise, ExpFamily, MatrixFunction, Resolvent, SpectrumProximityError, Taylor,
                       TrailingBlock, Var, constant, derivative)
from src.principles import (EmptyDomainError, NotAMaximumError, check_frobenius_principle,
                            check_max_direction, check_max_norm_principle, check_mean_value_identity,
                            check_min_direction, check_min_principle, constancy_report, factorize_at_max,
                            function_deviation, interior_maximum_of, iterated_factorization, locate_extremum,
                            refinement_report, scan_field)
from src.region import Disk, Rectangle
from src.report import CERTIFIED, INCONCLUSIVE, REFUTED
from src.scenario import load_scenario
from tests.conftest import SCENARIO_DIR, random_unitary

SCENARIOS = ["toy", "eq2_diag", "jordan_resolvent", "exp_counterexample", "constant", "k_example", "punctured"]


@dataclass(frozen=True, eq=False)
class Nowhere(MatrixFunction):
    """A 1x1 function with no regular point."""

    @property
    def n(self) -> int:
        return 1

    def eval(self, z):
        raise SpectrumProximityError("nowhere defined", 0.0)


def test_scan_field_shape_and_order(toy, square):
    field = scan_field(toy, square)
    assert field.values.shape == (square.size, 2)
    assert not field.flags.any()
    assert np.all(field.column(1) >= field.column(2))
    z = square.points[123]
    np.testing.assert_allclose(field.values[123], np.linalg.svd(toy.eval(z), compute_uv=False),
                               rtol=1e-12, atol=1e-12)


def test_diag_example_has_constant_norm_but_moves():
    F = load_scenario(str(SCENARIO_DIR / "eq2_diag.svf")).function
    field = scan_field(F, Disk(0j, 0.95, 101, 128), keep_matrices=True)
    assert field.deviation(1) <= 1e-10
    dev, _, _ = function_deviation(field)
    assert dev >= 0.5


def test_scan_is_identical_across_thread_counts(diag_one_z):
    settings.update_setting("scan_chunk_size", 500)
    region = Disk(0j, 0.95, 40, 64)
    one = scan_field(diag_one_z, region, threads=1)
    four = scan_field(diag_one_z, region, threads=4)
    np.testing.assert_array_equal(one.values, four.values)
    np.testing.assert_array_equal(one.flags, four.flags)


def test_scan_flags_singular_points(square):
    field = scan_field(Resolvent(np.zeros((1, 1))), square)
    assert field.flags.sum() == 1
    assert field.points[field.flags][0] == 0
    assert np.isnan(field.values[field.flags]).all()
    assert "flagged singular" in field.notes[0]


def test_scan_of_singular_constant_is_not_flagged():
    A = 3j * np.array([[0, 1, 1], [1, 1, 1], [1, 1, 1]], dtype=complex)
    field = scan_field(constant(A), Rectangle(-1.0, 1.0, -1.0, 1.0, 5, 5))
    assert not field.flags.any()
    root3 = np.sqrt(3.0)
    np.testing.assert_allclose(field.values, np.tile([3 * (1 + root3), 3 * (root3 - 1), 0.0], (25, 1)), atol=1e-13)
    assert field.deviation(1) == 0.0


def test_scan_rejects_empty_domain(square):
    with pytest.raises(EmptyDomainError):
        scan_field(Nowhere(), square)


def test_scan_respects_grid_cap(toy, square):
    settings.update_setting("max_grid_points", 100)
    with pytest.raises(PreconditionError):
        scan_field(toy, square)


def test_scan_notes_taylor_radius(square):
    F = Taylor(0j, (np.eye(2), np.eye(2)), radius=1.0)
    field = scan_field(F, square)
    assert any("Taylor radius" in note for note in field.notes)


def test_toy_minimizers(toy):
    region = load_scenario(str(SCENARIO_DIR / "toy.svf")).region
    field = scan_field(toy, region)
    s1_min = locate_extremum(field, 1, "min")
    s2_min = locate_extremum(field, 2, "min")
    assert abs(s1_min.location) <= 1e-4
    assert abs(s2_min.location - 1) <= 1e-4
    assert s2_min.value <= 1e-8
    assert abs(np.linalg.det(toy.eval(1 + 0j))) <= 1e-12


def test_locate_extremum_tie_break_prefers_smallest_re_then_im(const_identity):
    region = Rectangle(-1.0, 1.0, -1.0, 1.0, 5, 5)
    ext = locate_extremum(scan_field(const_identity, region), 1, "max")
    assert ext.grid_location == -1 - 1j
    assert ext.on_boundary
    assert not ext.refined


def test_locate_extremum_refines_off_grid(toy):
    region = Rectangle(-0.97, 1.03, -1.0, 1.0, 21, 21)
    ext = locate_extremum(scan_field(toy, region), 2, "min")
    assert ext.refined
    assert ext.value < ext.grid_value
    assert abs(ext.location - 1) < 1e-4


def test_locate_extremum_rejects_bad_kind(toy, square):
    with pytest.raises(ValueError):
        locate_extremum(scan_field(toy, square), 1, "saddle")


def test_interior_maximum(toy, const_identity, square):
    assert not interior_maximum_of(scan_field(toy, square), 1).attained
    assert interior_maximum_of(scan_field(const_identity, square), 1).attained


def test_constant_on_disk_has_interior_maximum(const_identity, small_disk):
    field = scan_field(const_identity, small_disk)
    assert interior_maximum_of(field, 1).attained
    assert interior_maximum_of(field, None).attained


def test_mean_value_identity_for_toy(toy):
    report = check_mean_value_identity(toy, 0j, 0.5, [0, 1], K=2, N=256)
    assert report.verdict == CERTIFIED
    assert abs(report.witnesses["lhs"] - 1.5) <= 1e-10
    assert report.residuals["difference"] <= 1e-10


def test_mean_value_identity_needs_more_terms():
    F = ExpFamily(np.eye(2))
    report = check_mean_value_identity(F, 0j, 1.0, [1, 0], K=1)
    assert report.verdict == INCONCLUSIVE
    assert report.residuals["tail"] == pytest.approx(0.25, rel=1e-8)
    assert check_mean_value_identity(F, 0j, 1.0, [1, 0], K=30).verdict == CERTIFIED


def test_mean_value_identity_preconditions(toy):
    with pytest.raises(PreconditionError):
        check_mean_value_identity(toy, 0j, 0.5, [1, 0, 0])
    with pytest.raises(PreconditionError):
        check_mean_value_identity(Resolvent(np.eye(2)), 0j, 1.5, [1, 0])


def test_max_direction_on_constant_norm_example(diag_one_z, small_disk):
    report = check_max_direction(diag_one_z, small_disk, 0j, Kd=6, samples=64)
    assert report.verdict == CERTIFIED
    assert report.residuals["constancy"] <= 1e-10
    assert all(norm <= 1e-8 for norm in report.witnesses["derivative_norms"])
    assert len(report.witnesses["derivative_norms"]) == 6
    for k in range(1, 7):
        assert np.linalg.norm(derivative(diag_one_z, 0j, k) @ report.witnesses["x0"]) <= 1e-8


def test_max_direction_away_from_a_maximum(toy, square):
    report = check_max_direction(toy, square, 0j, samples=8)
    assert report.verdict == INCONCLUSIVE
    assert report.witnesses["larger_value"] > 1.0
    assert "larger_point" in report.witnesses


def test_max_direction_with_a_wrong_vector(diag_one_z, small_disk):
    report = check_max_direction(diag_one_z, small_disk, 0j, Kd=2, x=[0, 1], samples=16)
    assert report.verdict == REFUTED


def test_max_direction_needs_interior_point(diag_one_z, small_disk):
    with pytest.raises(PreconditionError):
        check_max_direction(diag_one_z, small_disk, 2 + 0j)


def test_min_direction(small_disk):
    F = Entrywise(((Var(), Const(0)), (Const(0), Const(0.5))))
    report = check_min_direction(F, small_disk, 0.7 + 0j, samples=32)
    assert report.verdict == CERTIFIED
    assert report.residuals["sn_excess"] <= 1e-12
    assert abs(abs(report.witnesses["x0"][1]) - 1.0) < 1e-12


def test_min_direction_on_toy(toy, square):
    report = check_min_direction(toy, square, 0j, samples=16)
    assert report.verdict == CERTIFIED
    assert abs(abs(report.witnesses["x0"][0]) - 1.0) < 1e-12
    assert report.witnesses["sn_at_z0"] == pytest.approx(1.0)


def test_min_direction_without_a_constant_direction(diag_one_z, small_disk):
    report = check_min_direction(diag_one_z, small_disk, 0.5 + 0j, samples=16)
    assert report.verdict == INCONCLUSIVE


def _block_construction(rng, n, d):
    sigma = float(rng.uniform(1.0, 2.0))
    m = n - d

    def contraction():
        P = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        return P / np.linalg.norm(P, 2)

    U0, V0 = random_unitary(rng, n), random_unitary(rng, n)
    C0 = np.zeros((n, n), dtype=complex)
    C1 = np.zeros((n, n), dtype=complex)
    C0[:d, :d] = sigma * np.eye(d)
    C0[d:, d:] = 0.3 * contraction()
    C1[d:, d:] = 0.3 * contraction()
    return Taylor(0j, (U0 @ C0 @ V0, U0 @ C1 @ V0)), sigma


def test_factorization_recovers_the_split():
    rng = np.random.default_rng(0x5EED)
    region = Disk(0j, 0.9, 10, 24)
    for case in range(20):
        n, d = (3, 4)[case % 2], (1, 2)[(case // 2) % 2]
        F, sigma = _block_construction(rng, n, d)
        fac = factorize_at_max(F, region, 0j, samples=64, seed=case)
        assert fac.d == d
        assert abs(fac.sigma - sigma) <= 1e-10
        assert fac.residual_offdiag <= 1e-8
        assert fac.residual_topblock <= 1e-8
        assert fac.samples == 64
        assert fac.verdict == CERTIFIED
        assert isinstance(fac.inner, TrailingBlock)
        assert fac.inner.n == n - d
        assert fac.report().certified


def test_factorization_refuses_a_non_maximum(toy, square):
    with pytest.raises(NotAMaximumError) as info:
        factorize_at_max(toy, square, 0j)
    assert info.value.value > 1.0


def test_iterated_factorization_of_constant():
    F = load_scenario(str(SCENARIO_DIR / "constant.svf"))
    result = iterated_factorization(F.function, F.region)
    assert result.verdict == CERTIFIED
    assert [d for d, _ in result.chain] == [1, 2]
    np.testing.assert_allclose([s for _, s in result.chain], [3.0, 2.0], rtol=1e-12)
    assert result.residual is None
    assert result.report().witnesses["residual_dimension"] == 0


def test_iterated_factorization_stops_at_boundary_maximum(toy, square):
    result = iterated_factorization(toy, square)
    assert result.chain == []
    assert result.residual is toy


def test_constancy_report_examples(const_identity, toy, square):
    constant_report = constancy_report(const_identity, square)
    assert constant_report.verdict == CERTIFIED
    assert all(constant_report.witnesses["conditions"].values())
    moving = constancy_report(toy, square)
    assert moving.verdict == CERTIFIED
    assert not any(moving.witnesses["conditions"].values())


@pytest.mark.parametrize("name", SCENARIOS)
def test_constancy_statements_agree_across_scenarios(name):
    scenario = load_scenario(str(SCENARIO_DIR / f"{name}.svf"))
    report = constancy_report(scenario.function, scenario.region)
    assert len(set(report.witnesses["conditions"].values())) == 1


def test_min_principle_distinct_minimizers(toy, square):
    report = check_min_principle(toy, square)
    assert report.verdict == INCONCLUSIVE
    assert any(abs(z - 1) < 1e-4 for z in report.witnesses["zeros"])


def test_min_principle_common_minimizer_is_a_zero(diag_one_z, small_disk):
    report = check_min_principle(diag_one_z, small_disk)
    assert report.verdict == CERTIFIED
    assert report.residuals["det_abs"] <= report.tolerances["det_abs"]
    assert abs(report.witnesses["common_minimizer"]) < 1e-8


def test_min_principle_constant(const_identity, square):
    report = check_min_principle(const_identity, square)
    assert report.verdict == INCONCLUSIVE
    assert "constant" in report.notes[0]


def test_frobenius_principle(const_identity, toy, square):
    assert check_frobenius_principle(const_identity, square).verdict == CERTIFIED
    assert check_frobenius_principle(toy, square).verdict == INCONCLUSIVE


def test_max_norm_principle(diag_one_z, small_disk, toy, square):
    report = check_max_norm_principle(diag_one_z, small_disk)
    assert report.verdict == CERTIFIED
    assert report.residuals["lambda_deviation"] <= 1e-12
    assert check_max_norm_principle(toy, square).verdict == INCONCLUSIVE
    assert check_max_norm_principle(constant(np.zeros((2, 2))), square).verdict == CERTIFIED


def test_refinement_report(diag_one_z, small_disk, toy, square):
    constant_report = refinement_report(load_scenario(str(SCENARIO_DIR / "constant.svf")).function,
                                        Rectangle(-1.0, 1.0, -1.0, 1.0, 11, 11))
    assert constant_report.verdict == CERTIFIED
    assert constant_report.witnesses["leading_run"] == 3
    partial = refinement_report(diag_one_z, small_disk)
    assert partial.verdict == CERTIFIED
    assert partial.witnesses["leading_run"] == 1
    assert refinement_report(toy, square).verdict == INCONCLUSIVE
