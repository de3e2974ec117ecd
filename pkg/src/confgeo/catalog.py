"""Catalog of hypersurfaces with parallel Blaschke tensor.

Families:

    hxr   H^k x R^{m-k}                          in the Lorentz flat form
    sxh   S^{m-k}(a) x H^k(-1/(a^2-1)), a > 1    in the unit de Sitter
    hxh   H^k(-1/a^2) x H^{m-k}(-1/(1-a^2))      in the unit anti-de Sitter
    wp    warped-product cone (t u', t u'', u''') in the Lorentz flat form
    ex33  assembled from a maximal core in an anti-de Sitter quadric times
          a round sphere, divided by the leading light-cone coordinate
    ex32  the de Sitter-core analogue of ex33 (see make_example: the only
          closed-form core family admits no maximal member, so construction
          reports the obstruction instead of a chart)

All catalog charts are symbolic with exact jets.  Parameter orderings put
the block structure of the invariants first-to-last in the frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import sympy as sp
from scipy.optimize import brentq, minimize_scalar

from .chart import (
    ANTI_DE_SITTER,
    DE_SITTER,
    LORENTZ_FLAT,
    AmbientForm,
    Box,
    ImmersionChart,
    grid_points,
    register_template,
    shape_batch,
)
from .config import DEFAULT, NumericsConfig
from .errors import ConstructionError, ValidationError


# ---------------------------------------------------------------------------
# symbolic factor parametrizations
# ---------------------------------------------------------------------------

def sphere_components(radius, angles: list[sp.Symbol]) -> list[sp.Expr]:
    """S^p(radius) in R^{p+1}; nested angles, p = len(angles)."""
    p = len(angles)
    if p == 0:
        return [sp.Float(radius) if not isinstance(radius, sp.Expr) else radius]
    comps = []
    running = sp.Integer(1)
    for i, th in enumerate(angles):
        comps.append(running * sp.cos(th))
        running = running * sp.sin(th)
    comps.append(running)
    return [radius * c for c in comps]


def hyperbolic_components(radius, params: list[sp.Symbol]) -> list[sp.Expr]:
    """H^k(-1/radius^2) in R^{k+1} with one leading time slot."""
    k = len(params)
    if k == 0:
        return [radius if isinstance(radius, sp.Expr) else sp.Float(radius)]
    t0 = params[0]
    rest = sphere_components(sp.Integer(1), list(params[1:]))
    return [radius * sp.cosh(t0)] + [radius * sp.sinh(t0) * c for c in rest]


def _angle_box(count: int, first_range=(0.9, 1.7), rest_range=(0.25, 1.05)):
    los, his = [], []
    for i in range(count):
        lo, hi = first_range if i == 0 else rest_range
        los.append(lo)
        his.append(hi)
    return los, his


def _hyper_box(count: int, first_range=(0.35, 0.95), rest_range=(0.3, 1.0)):
    los, his = [], []
    for i in range(count):
        lo, hi = first_range if i == 0 else rest_range
        los.append(lo)
        his.append(hi)
    return los, his


# ---------------------------------------------------------------------------
# product families
# ---------------------------------------------------------------------------

def _check_range(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def make_hxr(m: int, k: int) -> ImmersionChart:
    """H^k x R^{m-k} in the Lorentz flat form R^{m+1} (1 time slot)."""
    m, k = int(m), int(k)
    _check_range(m >= 2, f"hxr requires m >= 2, got m={m}")
    _check_range(1 <= k <= m - 1, f"hxr requires 1 <= k <= m-1, got k={k}, m={m}")
    t = list(sp.symbols(f"t0:{k}"))
    v = list(sp.symbols(f"v0:{m - k}"))
    comps = hyperbolic_components(sp.Integer(1), t) + list(v)
    lo_t, hi_t = _hyper_box(k)
    # flat coordinates stay away from |v| = 0: the flat-form embedding is
    # singular there (1 + <u,u> = |v|^2 for this chart)
    lo = lo_t + [0.65] * (m - k)
    hi = hi_t + [1.45] * (m - k)
    return ImmersionChart(
        f"hxr(m={m},k={k})",
        m,
        AmbientForm(LORENTZ_FLAT, m + 1),
        Box(tuple(lo), tuple(hi)),
        exprs=sp.Matrix(comps),
        syms=tuple(t + v),
        params={"k": k},
        template="hxr",
    )


def make_sxh(m: int, k: int, a: float) -> ImmersionChart:
    """S^{m-k}(a) x H^k(-1/(a^2-1)) in the unit de Sitter quadric."""
    m, k = int(m), int(k)
    _check_range(m >= 2, f"sxh requires m >= 2, got m={m}")
    _check_range(1 <= k <= m - 1, f"sxh requires 1 <= k <= m-1, got k={k}, m={m}")
    _check_range(a > 1, f"sxh requires a > 1, got a={a}")
    b = sp.sqrt(sp.Float(a) ** 2 - 1)
    t = list(sp.symbols(f"t0:{k}"))
    th = list(sp.symbols(f"th0:{m - k}"))
    comps = hyperbolic_components(b, t) + sphere_components(sp.Float(a), th)
    lo_t, hi_t = _hyper_box(k)
    lo_s, hi_s = _angle_box(m - k)
    return ImmersionChart(
        f"sxh(m={m},k={k},a={a})",
        m,
        AmbientForm(DE_SITTER, m + 1, 1.0),
        Box(tuple(lo_t + lo_s), tuple(hi_t + hi_s)),
        exprs=sp.Matrix(comps),
        syms=tuple(t + th),
        params={"k": k, "a": float(a)},
        template="sxh",
    )


def make_hxh(m: int, k: int, a: float) -> ImmersionChart:
    """H^k(-1/a^2) x H^{m-k}(-1/(1-a^2)) in the unit anti-de Sitter quadric.

    Canonical slots: the two time coordinates of the factors come first.
    """
    m, k = int(m), int(k)
    _check_range(m >= 2, f"hxh requires m >= 2, got m={m}")
    _check_range(1 <= k <= m - 1, f"hxh requires 1 <= k <= m-1, got k={k}, m={m}")
    _check_range(0 < a < 1, f"hxh requires 0 < a < 1, got a={a}")
    b = sp.sqrt(1 - sp.Float(a) ** 2)
    s = list(sp.symbols(f"s0:{k}"))
    t = list(sp.symbols(f"t0:{m - k}"))
    w = hyperbolic_components(sp.Float(a), s)
    z = hyperbolic_components(b, t)
    comps = [w[0], z[0], *w[1:], *z[1:]]
    lo_w, hi_w = _hyper_box(k)
    lo_z, hi_z = _hyper_box(m - k)
    return ImmersionChart(
        f"hxh(m={m},k={k},a={a})",
        m,
        AmbientForm(ANTI_DE_SITTER, m + 1, 1.0),
        Box(tuple(lo_w + lo_z), tuple(hi_w + hi_z)),
        exprs=sp.Matrix(comps),
        syms=tuple(s + t),
        params={"k": k, "a": float(a)},
        template="hxh",
    )


def make_wp(m: int, p: int, q: int, a: float) -> ImmersionChart:
    """Warped-product cone u = (t u', t u'', u''') in the Lorentz flat form.

    u' runs over H^q(-1/(a^2-1)), u'' over S^p(a), t > 0, and u''' over the
    flat factor R^{m-p-q-1}.  Exactly three distinct conformal principal
    curvatures; both invariant tensors are parallel.
    """
    m, p, q = int(m), int(p), int(q)
    _check_range(p >= 1 and q >= 1, f"wp requires p, q >= 1, got p={p}, q={q}")
    _check_range(p + q < m, f"wp requires p + q < m, got p+q={p + q}, m={m}")
    _check_range(a > 1, f"wp requires a > 1, got a={a}")
    b = sp.sqrt(sp.Float(a) ** 2 - 1)
    s = list(sp.symbols(f"s0:{q}"))
    th = list(sp.symbols(f"th0:{p}"))
    tsym = sp.Symbol("t")
    v = list(sp.symbols(f"v0:{m - p - q - 1}"))
    up = hyperbolic_components(b, s)
    upp = sphere_components(sp.Float(a), th)
    comps = [tsym * c for c in up] + [tsym * c for c in upp] + list(v)
    lo_s, hi_s = _hyper_box(q, first_range=(0.1, 1.1))
    lo_p, hi_p = _angle_box(p, first_range=(0.2, 1.3))
    lo = lo_s + lo_p + [0.7] + [-0.55] * (m - p - q - 1)
    hi = hi_s + hi_p + [1.8] + [0.55] * (m - p - q - 1)
    return ImmersionChart(
        f"wp(m={m},p={p},q={q},a={a})",
        m,
        AmbientForm(LORENTZ_FLAT, m + 1),
        Box(tuple(lo), tuple(hi)),
        exprs=sp.Matrix(comps),
        syms=tuple(s + th + [tsym] + v),
        params={"p": p, "q": q, "a": float(a)},
        template="wp",
    )


# ---------------------------------------------------------------------------
# assembled examples with maximal cores
# ---------------------------------------------------------------------------

@dataclass
class CoreHypersurface:
    """Maximal space-like core inside a curvature-r quadric.

    The closed-form family used here is the two-factor cylinder with radii
    b1, b2 tied to the quadric radius r; the mean curvature vanishes iff the
    two principal-curvature groups balance, which the anti-de Sitter quadric
    admits and the de Sitter quadric does not (same-sign curvatures).
    """

    kind: str            # ambient quadric kind
    K: int
    j: int
    r: float
    b1: float
    b2: float
    chart: ImmersionChart
    target_h2: float     # required |h|^2 = (m-1)/m of the assembly
    m_total: int

    def expected_scalar_curvature(self) -> float:
        m, K, r = self.m_total, self.K, self.r
        if self.kind == DE_SITTER:
            return (m * K * (K - 1) + (m - 1) * r**2) / (m * r**2)
        return (-m * K * (K - 1) + (m - 1) * r**2) / (m * r**2)


def _ads_core(m: int, K: int, j: int, r: float | None, cfg: NumericsConfig) -> CoreHypersurface:
    """Maximal cylinder H^j x H^{K-j} inside the anti-de Sitter quadric of radius r.

    Maximality fixes b1^2 = r^2 j/K, b2^2 = r^2 (K-j)/K; the quadric radius
    is then root-solved so that |h|^2 = K/r^2 matches (m-1)/m.
    """
    target = (m - 1) / m

    def h2_of(rr: float) -> float:
        return K / rr**2 - target

    if r is None:
        lo, hi = 0.2, 5.0
        while h2_of(lo) < 0:
            lo /= 2
            if lo < 1e-8:
                raise ConstructionError("core radius bracket collapsed")
        while h2_of(hi) > 0:
            hi *= 2
            if hi > 1e8:
                raise ConstructionError("core radius bracket diverged")
        r = float(brentq(h2_of, lo, hi, xtol=1e-12, rtol=8.9e-16))
    else:
        r = float(r)
        if abs(h2_of(r)) > cfg.fd_tol:
            raise ValidationError(
                f"core radius r={r} violates the squared-norm constraint "
                f"|h|^2 = (m-1)/m by {h2_of(r):.3e}; solved value is "
                f"{math.sqrt(m * K / (m - 1)):.12g}"
            )
    b1 = r * math.sqrt(j / K)
    b2 = r * math.sqrt((K - j) / K)
    s = list(sp.symbols(f"s0:{j}"))
    t = list(sp.symbols(f"t0:{K - j}"))
    w = hyperbolic_components(sp.Float(b1), s)
    z = hyperbolic_components(sp.Float(b2), t)
    comps = [w[0], z[0], *w[1:], *z[1:]]
    lo_w, hi_w = _hyper_box(j, first_range=(-0.45, 0.45))
    lo_z, hi_z = _hyper_box(K - j, first_range=(-0.45, 0.45))
    chart = ImmersionChart(
        f"core-ads(K={K},j={j},r={r:.6g})",
        K,
        AmbientForm(ANTI_DE_SITTER, K + 1, r),
        Box(tuple(lo_w + lo_z), tuple(hi_w + hi_z)),
        exprs=sp.Matrix(comps),
        syms=tuple(s + t),
        params={"j": j, "r": r},
        template=None,
    )
    return CoreHypersurface(ANTI_DE_SITTER, K, j, r, b1, b2, chart, target, m)


def _ds_core_obstruction(m: int, K: int, j: int) -> str:
    """Quantify why the de Sitter cylinder family is never maximal.

    Both principal-curvature groups of H^j x S^{K-j} inside a de Sitter
    quadric carry the same sign, so K |H| r >= 2 sqrt(j (K-j)) > 0 for every
    radius split; the minimum is reported.  For K = 2 no core of any shape
    exists: the forced principal curvatures +-c are constant, the trace-free
    Codazzi equations then make the induced metric flat, while the Gauss
    equation demands curvature 1/r^2 + c^2 > 0.
    """
    def mean_curv(lb1: float) -> float:
        b1 = math.exp(lb1)
        b2 = math.hypot(1.0, b1)  # r = 1 scale; |H| scales as 1/r
        return (j * b2 / b1 + (K - j) * b1 / b2) / K

    res = minimize_scalar(mean_curv, bounds=(-6, 6), method="bounded")
    note = (
        f"minimal attainable |H| over the cylinder family is {res.fun:.6g} (at r=1 scale), "
        "never zero: both curvature groups share a sign inside a de Sitter quadric."
    )
    if K == 2:
        note += (
            " For K=2 the required core cannot exist at all: tr h = 0 and "
            "|h|^2 = (m-1)/m force constant principal curvatures +-c, the "
            "Codazzi equations then force a flat induced metric, and the "
            "Gauss equation gives the contradiction 1/r^2 + c^2 = 0."
        )
    return note


def make_example(
    family: str,
    m: int,
    K: int,
    split: int = 1,
    r: float | None = None,
    cfg: NumericsConfig = DEFAULT,
) -> ImmersionChart:
    """Assembled hypersurface (core, round factor) / leading light-cone slot.

    ex33: core = maximal cylinder in the anti-de Sitter quadric of radius r,
    round factor = S^{m-K}(r); the chart is x = (y1, y2) / y0 into the unit
    de Sitter, where y0 is the leading (positive) core coordinate.

    ex32 would need a maximal core inside a de Sitter quadric; the only
    closed-form candidates (two-factor cylinders) are never maximal, so a
    ConstructionError carrying the solver residual is raised.
    """
    family = family.lower()
    m, K, j = int(m), int(K), int(split)
    _check_range(family in ("ex32", "ex33"), f"unknown example family {family!r}")
    _check_range(m >= 3, f"{family} requires m >= 3, got m={m}")
    _check_range(2 <= K <= m - 1, f"{family} requires 2 <= K <= m-1, got K={K}, m={m}")
    _check_range(1 <= j <= K - 1, f"{family} requires 1 <= split <= K-1, got split={j}")
    if r is not None:
        _check_range(r > 0, f"{family} requires r > 0, got r={r}")

    if family == "ex32":
        raise ConstructionError(
            "ex32 core construction infeasible: " + _ds_core_obstruction(m, K, j)
        )

    core = _ads_core(m, K, j, r, cfg)
    rr = core.r
    th = list(sp.symbols(f"th0:{m - K}"))
    y2 = sphere_components(sp.Float(rr), th)
    y = list(core.chart.exprs)  # canonical (w0, z0, w_vec, z_vec)
    y0 = y[0]                   # leading time slot, = b1 cosh(s0) > 0
    y1 = y[1:]                  # remaining core slots, one time slot first
    comps = [c / y0 for c in y1] + [c / y0 for c in y2]
    lo = list(core.chart.domain.lo)
    hi = list(core.chart.domain.hi)
    lo_s, hi_s = _angle_box(m - K)
    lo += lo_s
    hi += hi_s
    chart = ImmersionChart(
        f"ex33(m={m},K={K},j={j},r={rr:.6g})",
        m,
        AmbientForm(DE_SITTER, m + 1, 1.0),
        Box(tuple(lo), tuple(hi)),
        exprs=sp.Matrix(comps),
        syms=tuple(list(core.chart.syms) + th),
        params={"K": K, "split": j, "r": rr},
        template="ex33",
        guards=[("leading core coordinate", y0)],
    )
    chart.core = core  # attached for verify_core and reporting
    return chart


@dataclass
class CoreReport:
    """verify_core output: residuals of the three core requirements."""

    core: str
    mean_curvature_residual: float
    h2_deviation: float
    scalar_curvature_deviation: float

    def to_dict(self) -> dict:
        return {
            "core": self.core,
            "mean_curvature_residual": self.mean_curvature_residual,
            "h2_deviation": self.h2_deviation,
            "scalar_curvature_deviation": self.scalar_curvature_deviation,
        }


def verify_core(core: CoreHypersurface, cfg: NumericsConfig = DEFAULT, counts: int = 3) -> CoreReport:
    """Check maximality, |h|^2 and the Gauss-equation scalar curvature.

    The intrinsic scalar curvature is assembled through the Gauss equation
    S = K(K-1) c_ambient + |h|^2 - K^2 H^2 with c_ambient = +-1/r^2 and a
    time-like normal.
    """
    K = core.K
    U = grid_points(core.chart.domain, [counts] * K)
    sb = shape_batch(core.chart, U, cfg, check_regular=False)
    g0inv = sb.metric_inv
    h2 = np.einsum("nab,nag,nbd,ngd->n", sb.h, g0inv, g0inv, sb.h)
    c_amb = (1.0 if core.kind == DE_SITTER else -1.0) / core.r**2
    scalar = K * (K - 1) * c_amb + h2 - K**2 * sb.H**2
    if h2.max() < cfg.fd_tol:
        # totally geodesic candidates never meet |h|^2 = (m-1)/m
        return CoreReport(core.chart.name, float(np.max(np.abs(sb.H))), float(core.target_h2), np.inf)
    return CoreReport(
        core=core.chart.name,
        mean_curvature_residual=float(np.max(np.abs(sb.H))),
        h2_deviation=float(np.max(np.abs(h2 - core.target_h2))),
        scalar_curvature_deviation=float(np.max(np.abs(scalar - core.expected_scalar_curvature()))),
    )


# ---------------------------------------------------------------------------
# registry and default instances
# ---------------------------------------------------------------------------

def make_product(family: str, m: int, k: int, a: float | None = None) -> ImmersionChart:
    family = family.lower()
    if family == "hxr":
        return make_hxr(m, k)
    if family == "sxh":
        return make_sxh(m, k, a)
    if family == "hxh":
        return make_hxh(m, k, a)
    raise ValidationError(f"unknown product family {family!r}; use hxr, sxh or hxh")


def _tmpl_hxr(m, k=1, lift=None):
    return make_hxr(m, k)


def _tmpl_sxh(m, k=1, a=math.sqrt(2.0), lift=None):
    return make_sxh(m, k, a)


def _tmpl_hxh(m, k=1, a=0.6, lift=None):
    return make_hxh(m, k, a)


def _tmpl_wp(m, p=1, q=1, a=2.0, lift=None):
    return make_wp(m, p, q, a)


def _tmpl_ex32(m, K=2, split=1, r=None, lift=None):
    return make_example("ex32", m, K, split, r)


def _tmpl_ex33(m, K=2, split=1, r=None, lift=None):
    return make_example("ex33", m, K, split, r)


for _name, _builder in [
    ("hxr", _tmpl_hxr),
    ("sxh", _tmpl_sxh),
    ("hxh", _tmpl_hxh),
    ("wp", _tmpl_wp),
    ("ex32", _tmpl_ex32),
    ("ex33", _tmpl_ex33),
]:
    register_template(_name, _builder)


# the instances exercised by the verification suite; ex32 is listed so the
# infeasibility surfaces through the same path as everything else
DEFAULT_INSTANCES: dict[str, dict] = {
    "hxr": {"m": 3, "k": 1},
    "sxh": {"m": 3, "k": 1, "a": math.sqrt(2.0)},
    "hxh": {"m": 3, "k": 1, "a": 0.6},
    "wp": {"m": 4, "p": 1, "q": 1, "a": 2.0},
    "ex33": {"m": 4, "K": 2, "split": 1},
    "ex32": {"m": 4, "K": 2, "split": 1},
}

CONSTRUCTIBLE = ("hxr", "sxh", "hxh", "wp", "ex33")


def build_instance(name: str, **overrides) -> ImmersionChart:
    """Build a catalog chart by CLI name with optional parameter overrides."""
    name = name.lower()
    if name not in DEFAULT_INSTANCES:
        raise ValidationError(f"unknown catalog name {name!r}; use one of {sorted(DEFAULT_INSTANCES)}")
    params = dict(DEFAULT_INSTANCES[name])
    params.update({k: v for k, v in overrides.items() if v is not None})
    builder = {
        "hxr": _tmpl_hxr,
        "sxh": _tmpl_sxh,
        "hxh": _tmpl_hxh,
        "wp": _tmpl_wp,
        "ex32": _tmpl_ex32,
        "ex33": _tmpl_ex33,
    }[name]
    return builder(**params)
