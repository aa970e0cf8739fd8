import numpy as np
import pytest

from diffeoflow import DecayClass, FieldError, Grid, classify_decay, membership_check
from diffeoflow.battery import (
    DEFAULT_SEED,
    bounded_outer_diffeos,
    classification_battery,
    flow_battery,
    gaussian_descriptor,
    lorentzian_descriptor,
    schwartz_diffeos,
    schwartz_flow_case,
    sobolev_flow_case,
    sobolev_inner_diffeos,
    tanh_descriptor,
)


class TestDescriptorHelpers:
    def test_gaussian_text_evaluates(self, coarse_grid):
        from diffeoflow import ScalarField
        text = gaussian_descriptor(0.25, 1.5, -0.5)
        field = ScalarField.from_descriptor(coarse_grid, text)
        x = np.asarray(coarse_grid.axis_coordinates())
        exact = 0.25 * np.exp(-(((x + 0.5) / 1.5) ** 2))
        assert np.allclose(field.values, exact, atol=1e-15)

    def test_lorentzian_damping(self, coarse_grid):
        from diffeoflow import ScalarField
        plain = lorentzian_descriptor(0.1, 1.0, 0.0, power=1)
        damped = lorentzian_descriptor(0.1, 1.0, 0.0, power=1, damping=2.6)
        p = ScalarField.from_descriptor(coarse_grid, plain).values
        d = ScalarField.from_descriptor(coarse_grid, damped).values
        x = np.asarray(coarse_grid.axis_coordinates())
        mid = np.abs(x) <= 1.0
        edge = np.abs(x) >= 7.0
        assert np.allclose(d[mid], p[mid], rtol=0.2)   # mid-range barely touched
        assert np.max(np.abs(d[edge])) < 2e-6          # tail suppressed
        assert np.max(np.abs(p[edge])) > 1e-3
        assert np.max(np.abs(d[edge] / p[edge])) < 1e-3

    def test_tanh_text_evaluates(self):
        from diffeoflow import ScalarField
        grid = Grid(1, 8.0, 65)
        field = ScalarField.from_descriptor(grid, tanh_descriptor(0.2, 1.3, 0.4),
                                            "clamp")
        x = np.asarray(grid.axis_coordinates())
        assert np.allclose(field.values, 0.2 * np.tanh((x - 0.4) / 1.3),
                           atol=1e-15)

    def test_negative_parameters_still_parse(self, coarse_grid):
        from diffeoflow import ScalarField
        text = gaussian_descriptor(-0.07, 0.9, -0.85)
        field = ScalarField.from_descriptor(coarse_grid, text)
        assert field.values.min() < 0.0


class TestSeededFamilies:
    def test_schwartz_family_reproducible(self, fine_grid):
        first = schwartz_diffeos(fine_grid, count=5)
        second = schwartz_diffeos(fine_grid, count=5)
        for a, b in zip(first, second):
            assert np.array_equal(a.displacement.values, b.displacement.values)
        different = schwartz_diffeos(fine_grid, count=5, seed=DEFAULT_SEED + 99)
        assert not np.array_equal(first[0].displacement.values,
                                  different[0].displacement.values)

    def test_schwartz_family_members_verify(self, fine_grid):
        for member in schwartz_diffeos(fine_grid, count=20):
            assert member.decay_class is DecayClass.SCHWARTZ
            assert member.epsilon > 0.8
            ok, _, _ = membership_check(member)
            assert ok

    def test_bounded_outers_are_bounded_class(self, fine_grid):
        members = bounded_outer_diffeos(fine_grid)
        assert len(members) == 5
        for member in members:
            assert member.decay_class is DecayClass.BOUNDED_ALL
            assert member.displacement.extrapolation == "clamp"
            assert member.epsilon > 0.5

    def test_sobolev_inners_measure_sobolev(self, fine_grid):
        members = sobolev_inner_diffeos(fine_grid, count=10)
        assert len(members) == 10
        for member in members:
            assert member.decay_class is DecayClass.SOBOLEV_INFINITY
            measured = classify_decay(member.displacement).inferred_class
            assert measured is DecayClass.SOBOLEV_INFINITY

    def test_one_dimensional_only(self, plane_grid):
        with pytest.raises(FieldError):
            schwartz_diffeos(plane_grid)
        with pytest.raises(FieldError):
            bounded_outer_diffeos(plane_grid)
        with pytest.raises(FieldError):
            sobolev_inner_diffeos(plane_grid)


class TestFlowBattery:
    def test_one_case_per_class_plus_plane(self):
        cases = flow_battery()
        assert len(cases) == 5
        names = [case.name for case in cases]
        assert names == ["schwartz-gaussian", "compact-bump",
                         "sobolev-lorentzian", "bounded-cosine",
                         "schwartz-rotation-2d"]
        classes = [case.field.decay_class for case in cases]
        assert set(classes) == set(DecayClass)
        assert cases[-1].grid.dim == 2

    def test_sizing_rule(self):
        # sup |d_x X| * t_final stays at or below 0.5 so trajectories
        # cannot leave the enlarged box
        for case in flow_battery():
            nodes = np.asarray(case.grid.nodes())
            worst = 0.0
            for t in np.linspace(0.0, case.t_final, 9):
                jac = case.field.jacobian(t, nodes)
                if case.grid.dim == 1:
                    sup = float(np.max(np.abs(jac)))
                else:
                    sup = float(np.max(np.linalg.svd(jac, compute_uv=False)))
                worst = max(worst, sup)
            assert worst * case.t_final <= 0.5 + 1e-9

    def test_named_cases(self):
        assert schwartz_flow_case().name == "schwartz-gaussian"
        assert sobolev_flow_case().name == "sobolev-lorentzian"
        assert schwartz_flow_case().field.decay_class is DecayClass.SCHWARTZ
        assert sobolev_flow_case().field.decay_class is DecayClass.SOBOLEV_INFINITY

    def test_reproducible(self):
        a = flow_battery()
        b = flow_battery()
        pts = np.array([[0.3], [-1.2]])
        for case_a, case_b in zip(a[:4], b[:4]):
            assert np.array_equal(case_a.field(0.25, pts), case_b.field(0.25, pts))


def test_classification_battery_spans_the_chain(fine_grid):
    pairs = classification_battery()
    assert [cls for _, cls in pairs] == [
        DecayClass.COMPACT_SUPPORT, DecayClass.SCHWARTZ,
        DecayClass.SOBOLEV_INFINITY, DecayClass.BOUNDED_ALL,
    ]
