import math

import numpy as np
import pytest

from confgeo.chart import grid_points, shape_batch, shape_data
from confgeo.config import DEFAULT
from confgeo.conformal_atlas import lift_chart
from confgeo.errors import ConsistencyError, ValidationError
from confgeo.invariants import (
    blaschke_and_b,
    conformal_frame,
    conformal_metric,
    conformal_position,
    covariant_derivatives,
    curvature_of_g,
    evaluate_field,
    field_report,
    field_report_csv,
    frame_route,
    gauss_residual_with_b,
    identity_residuals,
    run_cross_check,
)
from confgeo.pseudo_linalg import Signature, is_lightlike, pseudo_dot


class TestConformalPosition:
    def test_unit_factor_slot_order(self):
        # rho = 1, x = (0, ..., 0, 1): lift is (1, 0, ..., 0, 1), null
        from confgeo.chart import ShapeData

        m = 3
        x = np.zeros(m + 2)
        x[-1] = 1.0
        stub = ShapeData(
            u=np.zeros(m),
            x=x,
            induced_metric=np.eye(m),
            normal=np.zeros(m + 2),
            h=np.zeros((m, m)),
            h_frame=np.zeros((m, m)),
            H=0.0,
            rho=1.0,
            frame=np.eye(m),
            coframe=np.eye(m),
        )
        Y = conformal_position(stub)
        expected = np.zeros(m + 3)
        expected[0] = 1.0
        expected[-1] = 1.0
        assert np.array_equal(Y.coords, expected)
        assert is_lightlike(Y)

    def test_unit_point(self, sxh_chart):
        s = shape_data(sxh_chart, np.array([0.5, 1.2, 0.6]))
        Y = conformal_position(s)
        assert Y.coords[0] == pytest.approx(s.rho)
        assert is_lightlike(Y, 1e-12)

    def test_lightlike_on_wp(self, wp_lifted, rng):
        lo, hi = wp_lifted.domain.arrays()
        for u in rng.uniform(lo + 0.1, hi - 0.1, size=(5, wp_lifted.m)):
            Y = conformal_position(shape_data(wp_lifted, u))
            val = pseudo_dot(Y.coords[None], Y.coords[None], Y.sig.signs)[0]
            assert abs(val) <= 1e-9

    def test_assembled_chart_lift_is_the_assembly(self, ex33_chart):
        # Y = rho (1, x) must reproduce the assembled light-cone immersion
        # (core coordinates followed by the sphere factor)
        U = grid_points(ex33_chart.domain, [3], margin=0.04)
        sb = shape_batch(ex33_chart, U)
        Y = np.concatenate([sb.rho[:, None], sb.rho[:, None] * sb.x], axis=1)
        core = ex33_chart.core
        core_pts = core.chart.eval(U[:, : core.K])
        r = core.r
        th1, th2 = U[:, 2], U[:, 3]
        sphere = np.stack(
            [r * np.cos(th1), r * np.sin(th1) * np.cos(th2), r * np.sin(th1) * np.sin(th2)],
            axis=1,
        )
        assembled = np.concatenate([core_pts, sphere], axis=1)
        assert np.allclose(Y, assembled, atol=1e-9)


class TestConformalMetric:
    def test_constant_factor_scales_metric(self, sxh_chart):
        s = shape_data(sxh_chart, np.array([0.5, 1.2, 0.6]))
        g, frame, coframe = conformal_metric(s)
        assert np.allclose(g, s.rho**2 * s.induced_metric)
        assert np.allclose(frame.T @ g @ frame, np.eye(3), atol=1e-12)
        assert np.allclose(coframe @ frame, np.eye(3), atol=1e-12)

    def test_assembled_chart_product_metric(self, ex33_chart):
        # conformal metric = flat core block (b1^2, b2^2) + round sphere block
        U = grid_points(ex33_chart.domain, [3], margin=0.04)
        sb = shape_batch(ex33_chart, U)
        g = sb.rho[:, None, None] ** 2 * sb.metric
        r2 = ex33_chart.params["r"] ** 2
        for n in range(U.shape[0]):
            th1 = U[n, 2]
            expected = np.diag([r2 / 2, r2 / 2, r2, r2 * math.sin(th1) ** 2])
            assert np.allclose(g[n], expected, atol=1e-9)


class TestInvariantTensors:
    def test_trace_identities_at_point(self, ex33_chart):
        t = blaschke_and_b(ex33_chart, np.array([0.1, 0.2, 1.2, 0.6]))
        m = 4
        assert np.trace(t.B) == pytest.approx(0.0, abs=1e-10)
        assert np.sum(t.B**2) == pytest.approx((m - 1) / m, abs=1e-10)
        assert np.trace(t.A) == pytest.approx((m**2 * t.kappa - 1) / (2 * m), abs=1e-8)

    def test_frame_rotation_invariance(self, sxh_field, rng):
        Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        A, B = sxh_field.A[0], sxh_field.B[0]
        wA = np.linalg.eigvalsh(A)
        wB = np.linalg.eigvalsh(B)
        assert np.allclose(np.linalg.eigvalsh(Q.T @ A @ Q), wA, atol=1e-8)
        assert np.allclose(np.linalg.eigvalsh(Q.T @ B @ Q), wB, atol=1e-8)

    def test_cross_check_routes_agree(self, sxh_field):
        diff = run_cross_check(sxh_field)
        assert diff["cross_a"] <= 1e-6
        assert diff["cross_b"] <= 1e-6

    def test_cross_check_flags_route_disagreement(self, sxh_chart):
        U = grid_points(sxh_chart.domain, [3], margin=0.06)[:2]
        f = evaluate_field(sxh_chart, U, derivatives=False, curvature=False)
        f.A = f.A + 0.05  # simulate a broken formula route
        with pytest.raises(ConsistencyError, match="routes disagree"):
            run_cross_check(f)

    def test_requires_de_sitter_picture(self, hxr_chart):
        with pytest.raises(ValidationError, match="lift"):
            evaluate_field(hxr_chart, np.array([[0.5, 0.9, 0.9]]))


class TestCurvature:
    def test_product_scalar_curvatures(self, sxh_field, wp_field, ex33_field):
        assert np.allclose(sxh_field.kappa, 1 / 3, atol=1e-8)
        assert np.allclose(wp_field.kappa, -2 / 17, atol=1e-8)
        assert np.allclose(ex33_field.kappa, 1 / 16, atol=1e-8)

    def test_flat_catalog_block(self, hxr_chart):
        # H^1 x R^2 lifts with unit conformal factor: the conformal metric is flat
        lifted = lift_chart(hxr_chart, "psi1")
        R, ric, kappa = curvature_of_g(lifted, np.array([0.6, 0.9, 0.9]))
        assert abs(kappa) <= 1e-8
        assert np.max(np.abs(R)) <= 1e-7

    def test_sphere_block_sectional_curvature(self, ex33_field):
        # round factor of radius r: sectional curvature 1/r^2 = 3/8 in the
        # conformal metric, visible in the frame components of the curvature
        R = ex33_field.riemann
        # frame ordering puts the sphere directions last (triangular frame)
        K = R[:, 2, 3, 3, 2]
        assert np.allclose(K, 3 / 8, atol=1e-6)

    def test_gauss_identity_residual(self, sxh_field, wp_field, ex33_field):
        for f in (sxh_field, wp_field, ex33_field):
            assert f.residuals["gauss_conformal"] <= 1e-5


class TestCovariantDerivatives:
    def test_parallel_tensors_on_wp(self, wp_field):
        assert np.abs(wp_field.dA).max() <= 1e-5
        assert np.abs(wp_field.dB).max() <= 1e-5

    def test_codazzi_symmetry_residuals(self, sxh_field, ex33_field):
        for f in (sxh_field, ex33_field):
            assert f.residuals["b_codazzi"] <= 1e-5
            assert f.residuals["blaschke_codazzi"] <= 1e-5
            assert f.residuals["phi_codazzi_commutator"] <= 1e-5

    def test_wrapper_returns_components(self, ex33_chart):
        U = grid_points(ex33_chart.domain, [3], margin=0.06)[:2]
        td = covariant_derivatives(ex33_chart, U)
        m = 4
        assert td.A_ijk.shape == (2, m, m, m)
        assert td.B_ijk.shape == (2, m, m, m)
        assert td.Phi_ij.shape == (2, m, m)
        assert set(td.residuals) == {
            "phi_codazzi_commutator",
            "blaschke_codazzi",
            "b_codazzi",
        }


class TestIdentityResiduals:
    def test_full_suite_analytic_tier(self, sxh_chart):
        U = grid_points(sxh_chart.domain, [3], margin=0.06)
        res = identity_residuals(sxh_chart, U)
        for key in (
            "phi_codazzi_commutator",
            "blaschke_codazzi",
            "b_codazzi",
            "gauss_conformal",
            "trace_b",
            "norm_b",
            "trace_a_scalar",
        ):
            assert res[key] <= 1e-5, (key, res[key])

    def test_fd_tier(self, sxh_chart):
        from confgeo.invariants import required_margin

        fd_chart = sxh_chart.with_jet_mode("fd")
        U = grid_points(fd_chart.domain, [3], margin=required_margin(fd_chart))
        res = identity_residuals(fd_chart, U)
        assert max(res.values()) <= 1e-3

    def test_commutator_reduction_when_phi_vanishes(self, sxh_field):
        # with a vanishing conformal form the first Codazzi identity reduces
        # to commutativity of the two invariant tensors
        comm = np.einsum("nik,nkj->nij", sxh_field.B, sxh_field.A) - np.einsum(
            "nik,nkj->nij", sxh_field.A, sxh_field.B
        )
        assert np.max(np.abs(sxh_field.phi_norm())) <= 1e-8
        assert np.max(np.abs(comm)) <= 1e-8

    def test_perturbed_b_breaks_gauss_identity_linearly(self, sxh_field, rng):
        base = sxh_field.residuals["gauss_conformal"]
        S = rng.normal(size=(3, 3))
        S = 0.5 * (S + S.T)
        S -= np.trace(S) / 3 * np.eye(3)
        S /= np.linalg.norm(S)
        resid = []
        deltas = [1e-3, 1e-2]
        for d in deltas:
            B = sxh_field.B + d * S[None, :, :]
            resid.append(gauss_residual_with_b(sxh_field, B))
        assert resid[0] > 50 * base
        ratio = resid[1] / resid[0]
        assert 5 < ratio < 20  # linear response to within the quadratic tail


class TestFrameRoute:
    def test_frame_relations_analytic(self, sxh_chart):
        U = grid_points(sxh_chart.domain, [3], margin=0.06)[:4]
        fr = frame_route(sxh_chart, U)
        assert max(fr.relations.values()) <= 1e-8

    def test_frame_relations_fd_tier(self, sxh_chart):
        from confgeo.invariants import required_margin

        fd_chart = sxh_chart.with_jet_mode("fd")
        U = grid_points(fd_chart.domain, [3], margin=required_margin(fd_chart))[:4]
        fr = frame_route(fd_chart, U)
        assert max(fr.relations.values()) <= 1e-5

    def test_conformal_frame_wrapper(self, sxh_chart):
        cf = conformal_frame(sxh_chart, np.array([0.5, 1.2, 0.6]))
        sig = cf.Y.sig
        assert sig == Signature(2, 6)
        assert max(cf.relations.values()) <= 1e-8

    def test_native_picture_matches_lifted_computation(self, hxr_chart):
        # invariants computed in the flat picture agree with the lifted ones
        U = grid_points(hxr_chart.domain, [3], margin=0.06)[:4]
        fr = frame_route(hxr_chart, U)
        lifted = lift_chart(hxr_chart, "psi1")
        f = evaluate_field(lifted, U, derivatives=False, curvature=False)
        wA_native = np.sort(np.linalg.eigvalsh(fr.A), axis=1)
        assert np.allclose(wA_native, f.A_eigs(), atol=1e-5)
        wB_native = np.sort(np.abs(np.linalg.eigvalsh(fr.B)), axis=1)
        assert np.allclose(wB_native, np.sort(np.abs(f.B_eigs()), axis=1), atol=1e-5)


class TestReports:
    def test_json_schema(self, sxh_field):
        rep = field_report(sxh_field)
        assert rep["chart"].startswith("sxh")
        point = rep["points"][0]
        assert set(point) == {"u", "rho", "H", "A_eigs", "B_eigs", "Phi_norm", "residuals"}
        assert set(rep["maxima"]) == set(point["residuals"])

    def test_csv_schema(self, sxh_field):
        text = field_report_csv(sxh_field)
        lines = text.strip().split("\n")
        assert len(lines) == 1 + sxh_field.U.shape[0]
        header = lines[0].split(",")
        assert header[:3] == ["u_0", "u_1", "u_2"]
        assert "Phi_norm" in header
