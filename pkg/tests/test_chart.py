import json
import math

import numpy as np
import pytest
import sympy as sp

from confgeo.catalog import sphere_components
from confgeo.chart import (
    AmbientForm,
    Box,
    ImmersionChart,
    chart_from_dict,
    chart_to_dict,
    grid_points,
    load_chart,
    save_chart,
    shape_batch,
    shape_data,
    validate_regularity,
)
from confgeo.config import FDConfig
from confgeo.errors import DomainError, RegularityError, ValidationError


def fd_chart_from(fn, m, ambient, box, order=4):
    return ImmersionChart(
        "fd-test", m, ambient, box, eval_fn=fn, jet_mode="fd", fd=FDConfig(order=order)
    )


class TestJets:
    def test_constant_chart_derivatives_vanish(self):
        c = np.array([1.0, 0.0, 0.0, 0.2])
        chart = fd_chart_from(
            lambda U: np.tile(c, (U.shape[0], 1)),
            3,
            AmbientForm("lorentz_flat", 4),
            Box((-1, -1, -1), (1, 1, 1)),
        )
        jet = chart.jet(np.zeros((1, 3)), 3)
        for r in (1, 2, 3):
            assert np.max(np.abs(jet[r])) <= 1e-9

    def test_linear_chart_second_derivatives(self, rng):
        M = rng.normal(size=(4, 3))
        chart = fd_chart_from(
            lambda U: U @ M.T,
            3,
            AmbientForm("lorentz_flat", 4),
            Box((-1, -1, -1), (1, 1, 1)),
        )
        jet = chart.jet(np.zeros((2, 3)), 2)
        assert np.max(np.abs(jet[2])) <= 1e-12
        assert np.allclose(jet[1][0], M, atol=1e-12)

    def test_fd_versus_analytic_on_wp(self, wp_chart, rng):
        lo, hi = wp_chart.domain.arrays()
        margin = wp_chart.with_jet_mode("fd").fd_margin(4) + 0.01
        U = rng.uniform(lo + margin, hi - margin, size=(10, wp_chart.m))
        fd_version = wp_chart.with_jet_mode("fd")
        an = wp_chart.jet(U, 4)
        fd = fd_version.jet(U, 4)
        for r in range(1, 5):
            scale = 1.0 + np.max(np.abs(an[r]))
            assert np.max(np.abs(an[r] - fd[r])) / scale <= 1e-7

    def test_fd_jet_needs_margin(self):
        chart = fd_chart_from(
            lambda U: np.concatenate([U, np.ones((U.shape[0], 1))], axis=1),
            2,
            AmbientForm("lorentz_flat", 3),
            Box((0, 0), (1, 1)),
        )
        with pytest.raises(DomainError):
            chart.jet(np.array([[0.01, 0.5]]), 4)

    def test_jet_order_bounds(self, sxh_chart):
        with pytest.raises(ValidationError):
            sxh_chart.jet(np.array([[0.5, 1.2, 0.6]]), 5)


class TestShapeData:
    def test_product_chart_oracle(self, sxh_chart):
        # closed forms for S^2(sqrt2) x H^1(-1): rho^2 = 1/2, |H| = 2 sqrt2 / 3,
        # principal curvatures {sqrt2, 1/sqrt2 x2} up to the orientation sign
        U = grid_points(sxh_chart.domain, [3], margin=0.02)
        sb = shape_batch(sxh_chart, U)
        assert np.allclose(sb.rho**2, 0.5, atol=1e-12)
        assert np.allclose(np.abs(sb.H), 2 * math.sqrt(2) / 3, atol=1e-12)
        pc = np.sort(np.abs(np.linalg.eigvals(np.einsum("nij,njk->nik", sb.metric_inv, sb.h))), axis=1)
        assert np.allclose(pc, [1 / math.sqrt(2), 1 / math.sqrt(2), math.sqrt(2)], atol=1e-10)

    def test_assembled_chart_conformal_factor_is_leading_slot(self, ex33_chart):
        # the conformal factor must equal the leading coordinate of the core
        U = grid_points(ex33_chart.domain, [3], margin=0.02)
        sb = shape_batch(ex33_chart, U)
        r = ex33_chart.params["r"]
        b1 = r * math.sqrt(0.5)
        y0 = b1 * np.cosh(U[:, 0])
        assert np.allclose(sb.rho, y0, atol=1e-8)

    def test_normal_flip_symmetry(self, sxh_chart):
        u = np.array([0.5, 1.2, 0.6])
        plus = shape_data(sxh_chart, u, normal_sign=1.0)
        minus = shape_data(sxh_chart, u, normal_sign=-1.0)
        assert np.allclose(plus.h, -minus.h, atol=1e-12)
        assert plus.H == pytest.approx(-minus.H)
        assert plus.rho == pytest.approx(minus.rho)

    def test_normal_is_unit_timelike_and_orthogonal(self, wp_chart):
        U = grid_points(wp_chart.domain, [3], margin=0.02)
        sb = shape_batch(wp_chart, U)
        signs = sb.signs
        nn = np.einsum("nc,c,nc->n", sb.normal, signs, sb.normal)
        assert np.allclose(nn, -1.0, atol=1e-9)
        ndx = np.einsum("nc,c,nci->ni", sb.normal, signs, sb.dx)
        assert np.max(np.abs(ndx)) <= 1e-9

    def test_ambient_constraint(self, ex33_chart):
        U = grid_points(ex33_chart.domain, [3], margin=0.02)
        x = ex33_chart.eval(U)
        assert np.max(ex33_chart.ambient.quadric_residual(x)) <= 1e-9

    def test_reparametrization_invariance(self, sxh_chart, rng):
        A = np.eye(3) + 0.15 * rng.normal(size=(3, 3))
        b = 0.05 * rng.normal(size=3)
        re = sxh_chart.reparametrized(A, b)
        u = np.array([0.55, 1.25, 0.65])
        v = np.linalg.solve(A, u - b)
        s1 = shape_data(sxh_chart, u)
        s2 = shape_data(re, v)
        assert s1.rho == pytest.approx(s2.rho, rel=1e-6)
        assert abs(s1.H) == pytest.approx(abs(s2.H), rel=1e-6)
        pc1 = np.sort(np.abs(np.linalg.eigvals(np.linalg.inv(s1.induced_metric) @ s1.h)))
        pc2 = np.sort(np.abs(np.linalg.eigvals(np.linalg.inv(s2.induced_metric) @ s2.h)))
        assert np.allclose(pc1, pc2, rtol=1e-6)


class TestRegularity:
    def test_umbilic_slice_rejected(self):
        # constant-time slice of the de Sitter form: totally umbilic, rho = 0
        th = sp.symbols("th0:3")
        comps = [sp.sinh(1)] + sphere_components(sp.cosh(1), list(th))
        chart = ImmersionChart(
            "umbilic-slice",
            3,
            AmbientForm("de_sitter", 4, 1.0),
            Box((0.9, 0.3, 0.3), (1.7, 1.1, 1.1)),
            exprs=sp.Matrix(comps),
            syms=tuple(th),
        )
        U = grid_points(chart.domain, [3])
        rep = validate_regularity(chart, U)
        assert not rep.regular
        assert rep.min_rho2 <= 1e-10
        with pytest.raises(RegularityError):
            shape_batch(chart, U)

    def test_wp_regular(self, wp_chart):
        U = grid_points(wp_chart.domain, [3], margin=0.02)
        rep = validate_regularity(wp_chart, U)
        assert rep.regular
        assert rep.min_rho2 > 0.1

    def test_rank_deficient_chart_reported(self):
        u, v = sp.symbols("u v")
        comps = [sp.cosh(u), sp.sinh(u), sp.Integer(0) * v]
        chart = ImmersionChart(
            "degenerate",
            2,
            AmbientForm("lorentz_flat", 3),
            Box((-1, -1), (1, 1)),
            exprs=sp.Matrix(comps),
            syms=(u, v),
        )
        rep = validate_regularity(chart, grid_points(chart.domain, [3]))
        assert not rep.regular
        assert abs(rep.min_metric_eig) <= 1e-12


class TestChartFiles:
    def test_round_trip_lossless(self, tmp_path, sxh_chart):
        d = chart_to_dict(sxh_chart)
        path = tmp_path / "chart.json"
        save_chart(sxh_chart, path)
        loaded = load_chart(path)
        assert chart_to_dict(loaded) == d
        u = np.array([[0.5, 1.2, 0.6]])
        assert np.allclose(sxh_chart.eval(u), loaded.eval(u))

    def test_round_trip_fd_fields(self, tmp_path, wp_chart):
        fd_version = wp_chart.with_jet_mode("fd", FDConfig(order=2, step=1e-3))
        d = chart_to_dict(fd_version)
        assert d["jet"] == "fd"
        assert d["fd"] == {"order": 2, "step": 1e-3}
        rebuilt = chart_from_dict(json.loads(json.dumps(d)))
        assert chart_to_dict(rebuilt) == d

    def test_unknown_template_rejected(self):
        with pytest.raises(ValidationError):
            chart_from_dict({"name": "nope", "m": 3, "params": {}, "domain": {"lo": [0], "hi": [1]}})


class TestGrids:
    def test_counts_validated(self, sxh_chart):
        with pytest.raises(ValidationError):
            grid_points(sxh_chart.domain, [2])

    def test_margin_inset(self, sxh_chart):
        U = grid_points(sxh_chart.domain, [3], margin=0.1)
        lo, hi = sxh_chart.domain.arrays()
        assert np.all(U >= lo + 0.1 - 1e-12)
        assert np.all(U <= hi - 0.1 + 1e-12)
