"""Parametrized hypersurface patches and their first/second fundamental data.

A chart is a map x: D subset R^m -> ambient space form, either symbolic
(sympy expressions, exact jets) or a bare evaluator (jets by central
differences).  Shape data follows the conventions:

    h(X, Y) = <D_X n, Y>  = -<n, D_X D_Y x>      (time-like unit normal n)
    H       = (1/m) tr_{g0} h
    rho^2   = m/(m-1) (|h|^2 - m H^2)            (norms in the induced metric)

The normal is the generalized cross product of the tangent vectors (and the
position row on quadric ambients), normalized time-like, oriented so that
its first significant component is negative.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
import sympy as sp

from .config import FDConfig, NumericsConfig, DEFAULT
from .errors import (
    ChartDomainError,
    DimensionMismatchError,
    DomainError,
    RegularityError,
    ValidationError,
)
from .fd import fd_partial
from .pseudo_linalg import (
    Signature,
    batched_normal,
    pseudo_dot,
    triangular_frame,
)

DE_SITTER = "de_sitter"
ANTI_DE_SITTER = "anti_de_sitter"
LORENTZ_FLAT = "lorentz_flat"


@dataclass(frozen=True)
class AmbientForm:
    """Lorentzian space form the chart maps into.

    de_sitter(a):       {<x,x>_1 = +a^2} in R^{dim+1} with 1 time slot
    anti_de_sitter(a):  {<x,x>_2 = -a^2} in R^{dim+1} with 2 time slots
    lorentz_flat:       R^{dim} with 1 time slot, no constraint
    `dim` is the dimension of the space form itself (m+1 for a hypersurface
    chart of dimension m).
    """

    kind: str
    dim: int
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in (DE_SITTER, ANTI_DE_SITTER, LORENTZ_FLAT):
            raise ValidationError(f"unknown ambient kind {self.kind!r}")
        if self.kind != LORENTZ_FLAT and not self.radius > 0:
            raise ValidationError(f"ambient radius must be positive, got {self.radius}")

    @property
    def embedding_dim(self) -> int:
        return self.dim if self.kind == LORENTZ_FLAT else self.dim + 1

    @property
    def signature(self) -> Signature:
        time = 2 if self.kind == ANTI_DE_SITTER else 1
        return Signature(time, self.embedding_dim)

    @property
    def quadric_value(self) -> float | None:
        if self.kind == DE_SITTER:
            return self.radius**2
        if self.kind == ANTI_DE_SITTER:
            return -(self.radius**2)
        return None

    def quadric_residual(self, x: np.ndarray) -> np.ndarray:
        """|<x,x> - quadric constant| per point; zeros for the flat form."""
        if self.kind == LORENTZ_FLAT:
            return np.zeros(x.shape[0])
        signs = self.signature.signs
        return np.abs(pseudo_dot(x, x, signs) - self.quadric_value)


@dataclass(frozen=True)
class Box:
    """Axis-aligned parameter domain."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValidationError("domain lo/hi length mismatch")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValidationError("domain requires lo < hi per axis")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.lo), np.asarray(self.hi)

    def contains(self, U: np.ndarray, margin: float = 0.0) -> bool:
        lo, hi = self.arrays()
        return bool(np.all(U >= lo + margin) and np.all(U <= hi - margin))

    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(np.concatenate(self.arrays())))))


class Jet:
    """Derivative stacks of a chart: orders[r] has shape (N, comps) + (m,)*r."""

    def __init__(self, orders: dict[int, np.ndarray]):
        self.orders = orders

    def __getitem__(self, r: int) -> np.ndarray:
        return self.orders[r]

    @property
    def max_order(self) -> int:
        return max(self.orders)


def _multi_indices(m: int, order: int) -> list[tuple[int, ...]]:
    out = []
    for alpha in itertools.product(range(order + 1), repeat=m):
        if sum(alpha) <= order:
            out.append(alpha)
    return out


class ImmersionChart:
    """A hypersurface patch with derivative-jet access.

    Symbolic charts carry sympy expressions and give exact jets; evaluator
    charts fall back to finite differences of the declared order.  Instances
    are immutable by convention; internal lambdify caches are the only
    mutable state and are safe to rebuild.
    """

    def __init__(
        self,
        name: str,
        m: int,
        ambient: AmbientForm,
        domain: Box,
        exprs: sp.Matrix | None = None,
        syms: tuple[sp.Symbol, ...] | None = None,
        eval_fn: Callable[[np.ndarray], np.ndarray] | None = None,
        jet_mode: str = "analytic",
        fd: FDConfig | None = None,
        params: dict | None = None,
        template: str | None = None,
        guards: list[tuple[str, sp.Expr]] | None = None,
    ):
        if domain.dim != m:
            raise ValidationError(f"domain dimension {domain.dim} != m={m}")
        if ambient.dim != m + 1:
            raise ValidationError(f"ambient dimension {ambient.dim} != m+1={m + 1}")
        if jet_mode not in ("analytic", "fd"):
            raise ValidationError(f"jet mode must be 'analytic' or 'fd', got {jet_mode!r}")
        if exprs is None and eval_fn is None:
            raise ValidationError("chart needs expressions or an evaluator")
        if jet_mode == "analytic" and exprs is None:
            raise ValidationError("analytic jets require symbolic expressions")
        self.name = name
        self.m = m
        self.ambient = ambient
        self.domain = domain
        self.exprs = exprs
        self.syms = tuple(syms) if syms is not None else None
        self._eval_fn = eval_fn
        self.jet_mode = jet_mode
        self.fd = fd or FDConfig()
        self.params = dict(params or {})
        self.template = template
        self.guards = list(guards or [])
        self._lambdified: dict[tuple[int, ...], Callable] = {}
        self._jet_fns: dict[int, tuple[Callable, list[tuple[int, ...]]]] = {}
        self._guard_fns: list[tuple[str, Callable]] | None = None

    # -- evaluation ---------------------------------------------------------

    @property
    def n_comps(self) -> int:
        return self.ambient.embedding_dim

    def _lambdify(self, alpha: tuple[int, ...]) -> Callable:
        fn = self._lambdified.get(alpha)
        if fn is None:
            d = self.exprs
            for ax, k in enumerate(alpha):
                if k:
                    d = sp.diff(d, self.syms[ax], k)
            fn = sp.lambdify(self.syms, list(d), "numpy")
            self._lambdified[alpha] = fn
        return fn

    def _check_guards(self, U: np.ndarray) -> None:
        if not self.guards:
            return
        if self._guard_fns is None:
            self._guard_fns = [
                (name, sp.lambdify(self.syms, expr, "numpy")) for name, expr in self.guards
            ]
        for name, fn in self._guard_fns:
            vals = np.broadcast_to(np.asarray(fn(*[U[:, i] for i in range(self.m)]), float), (U.shape[0],))
            if np.any(np.abs(vals) < 1e-12):
                raise ChartDomainError(
                    f"chart {self.name!r}: denominator {name!r} vanishes at a requested point"
                )

    def eval(self, U: np.ndarray) -> np.ndarray:
        """Evaluate the immersion on a batch U (N, m) -> (N, comps)."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if U.shape[1] != self.m:
            raise DimensionMismatchError(f"points have {U.shape[1]} coords, chart expects {self.m}")
        if self.exprs is not None:
            self._check_guards(U)
            out = self._lambdify((0,) * self.m)(*[U[:, i] for i in range(self.m)])
            cols = [np.broadcast_to(np.asarray(c, dtype=float), (U.shape[0],)) for c in out]
            return np.stack(cols, axis=1)
        return np.asarray(self._eval_fn(U), dtype=float)

    def _eval_alpha(self, U: np.ndarray, alpha: tuple[int, ...]) -> np.ndarray:
        fn = self._lambdify(alpha)
        out = fn(*[U[:, i] for i in range(self.m)])
        cols = [np.broadcast_to(np.asarray(c, dtype=float), (U.shape[0],)) for c in out]
        return np.stack(cols, axis=1)

    def _jet_fn(self, order: int) -> tuple[Callable, list[tuple[int, ...]]]:
        """One cse-lambdified function returning every multi-index derivative
        up to `order`; shared subexpressions make this far cheaper than
        per-index evaluation on composed charts."""
        cached = self._jet_fns.get(order)
        if cached is not None:
            return cached
        alphas = _multi_indices(self.m, order)
        flat: list[sp.Expr] = []
        for alpha in alphas:
            d = self.exprs
            for ax, k in enumerate(alpha):
                if k:
                    d = sp.diff(d, self.syms[ax], k)
            flat.extend(list(d))
        fn = sp.lambdify(self.syms, flat, "numpy", cse=True)
        self._jet_fns[order] = (fn, alphas)
        return fn, alphas

    def _eval_jet_all(self, U: np.ndarray, order: int) -> dict[tuple[int, ...], np.ndarray]:
        fn, alphas = self._jet_fn(order)
        out = fn(*[U[:, i] for i in range(self.m)])
        c = self.n_comps
        result: dict[tuple[int, ...], np.ndarray] = {}
        for idx, alpha in enumerate(alphas):
            cols = [
                np.broadcast_to(np.asarray(v, dtype=float), (U.shape[0],))
                for v in out[idx * c : (idx + 1) * c]
            ]
            result[alpha] = np.stack(cols, axis=1)
        return result

    def fd_margin(self, order: int) -> float:
        """Parameter-space reach of the FD jet stencils up to `order`."""
        if self.jet_mode != "fd":
            return 0.0
        reach = 0.0
        for r in range(1, order + 1):
            h = self.fd.step_for(r, scale=self.domain.scale())
            reach = max(reach, 3.0 * h)
        return reach

    # -- jets ---------------------------------------------------------------

    def jet(self, U: np.ndarray, order: int) -> Jet:
        """Partial derivatives of x up to `order` (<= 4)."""
        if not (0 <= order <= 4):
            raise ValidationError(f"jet order must be within 0..4, got {order}")
        U = np.atleast_2d(np.asarray(U, dtype=float))
        N = U.shape[0]
        m, c = self.m, self.n_comps
        orders: dict[int, np.ndarray] = {}
        for r in range(order + 1):
            orders[r] = np.zeros((N, c) + (m,) * r)
        use_fd = self.jet_mode == "fd" or self.exprs is None
        if use_fd:
            lo, hi = self.domain.arrays()
            margin = self.fd_margin(order)
            if not self.domain.contains(U, margin=margin):
                raise DomainError(
                    f"chart {self.name!r}: FD jet of order {order} needs margin "
                    f"{margin:.3e} inside the domain"
                )
        all_vals: dict[tuple[int, ...], np.ndarray] | None = None
        if not use_fd:
            self._check_guards(U)
            all_vals = self._eval_jet_all(U, order)
        for alpha in _multi_indices(m, order):
            r = sum(alpha)
            if use_fd:
                if r > 0:
                    vals = fd_partial(self.eval, U, alpha, self.fd, scale=self.domain.scale())
                else:
                    vals = self.eval(U)
            else:
                vals = all_vals[alpha]
            idx = tuple(ax for ax, k in enumerate(alpha) for _ in range(k))
            for perm in set(itertools.permutations(idx)):
                orders[r][(slice(None), slice(None)) + perm] = vals
        return Jet(orders)

    # -- transforms ---------------------------------------------------------

    def reparametrized(self, A: np.ndarray, b: np.ndarray, name: str | None = None) -> "ImmersionChart":
        """Chart composed with the affine parameter change u = A v + b.

        Only symbolic charts support this.  The new domain is the bounding
        box of the preimage of the old one (a parallelotope), so boundary
        margins are advisory near the corners.
        """
        if self.exprs is None:
            raise ValidationError("reparametrization requires a symbolic chart")
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        v = sp.symbols(f"v0:{self.m}")
        subs = {
            self.syms[i]: sum(sp.Float(A[i, j]) * v[j] for j in range(self.m)) + sp.Float(b[i])
            for i in range(self.m)
        }
        exprs = self.exprs.subs(subs, simultaneous=True)
        guards = [(gname, gexpr.subs(subs, simultaneous=True)) for gname, gexpr in self.guards]
        Ainv = np.linalg.inv(A)
        lo, hi = self.domain.arrays()
        corners = np.array(list(itertools.product(*zip(lo, hi))))
        pre = (corners - b) @ Ainv.T
        dom = Box(tuple(pre.min(axis=0)), tuple(pre.max(axis=0)))
        return ImmersionChart(
            name or f"{self.name}~affine",
            self.m,
            self.ambient,
            dom,
            exprs=sp.Matrix(exprs),
            syms=v,
            jet_mode=self.jet_mode,
            fd=self.fd,
            params=dict(self.params),
            template=self.template,
            guards=guards,
        )

    def with_jet_mode(self, jet_mode: str, fd: FDConfig | None = None) -> "ImmersionChart":
        return ImmersionChart(
            self.name,
            self.m,
            self.ambient,
            self.domain,
            exprs=self.exprs,
            syms=self.syms,
            eval_fn=self._eval_fn,
            jet_mode=jet_mode,
            fd=fd or self.fd,
            params=dict(self.params),
            template=self.template,
            guards=list(self.guards),
        )


# ---------------------------------------------------------------------------
# shape data
# ---------------------------------------------------------------------------


@dataclass
class ShapeBatch:
    """First/second fundamental data at a batch of points (coordinate components)."""

    chart: ImmersionChart
    U: np.ndarray       # (N, m)
    x: np.ndarray       # (N, c)
    dx: np.ndarray      # (N, c, m)
    d2x: np.ndarray     # (N, c, m, m)
    metric: np.ndarray  # induced metric g0 (N, m, m)
    metric_inv: np.ndarray
    normal: np.ndarray  # (N, c)
    h: np.ndarray       # scalar second fundamental form, coords (N, m, m)
    H: np.ndarray       # (N,)
    rho: np.ndarray     # (N,)
    frame: np.ndarray   # induced-orthonormal frame coefficients F0 (N, m, m)

    @property
    def signs(self) -> np.ndarray:
        return self.chart.ambient.signature.signs

    def coframe(self) -> np.ndarray:
        return np.linalg.inv(self.frame)

    def h_frame(self) -> np.ndarray:
        return np.einsum("nai,nab,nbj->nij", self.frame, self.h, self.frame)


@dataclass
class ShapeData:
    """Per-point view of ShapeBatch with the documented fields."""

    u: np.ndarray
    x: np.ndarray
    induced_metric: np.ndarray
    normal: np.ndarray
    h: np.ndarray
    h_frame: np.ndarray
    H: float
    rho: float
    frame: np.ndarray
    coframe: np.ndarray


def shape_batch(
    chart: ImmersionChart,
    U: np.ndarray,
    cfg: NumericsConfig = DEFAULT,
    normal_sign: float = 1.0,
    check_regular: bool = True,
) -> ShapeBatch:
    """Induced metric, oriented normal, h, H, rho on a batch of points.

    normal_sign = -1 flips the deterministic orientation rule; h and H then
    negate while rho and the metric are unchanged.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    jet = chart.jet(U, 2)
    x, dx, d2x = jet[0], jet[1], jet[2]
    signs = chart.ambient.signature.signs
    g0 = np.einsum("nci,c,ncj->nij", dx, signs, dx)
    rows = np.swapaxes(dx, 1, 2)  # (N, m, c)
    if chart.ambient.kind != LORENTZ_FLAT:
        rows = np.concatenate([rows, x[:, None, :]], axis=1)
    n = batched_normal(rows, signs) * normal_sign
    h = -np.einsum("nc,c,ncab->nab", n, signs, d2x)
    try:
        g0inv = np.linalg.inv(g0)
    except np.linalg.LinAlgError as exc:
        raise RegularityError(f"induced metric singular: {exc}") from exc
    H = np.einsum("nab,nab->n", g0inv, h) / chart.m
    h2 = np.einsum("nab,nag,nbd,ngd->n", h, g0inv, g0inv, h)
    rho2 = chart.m / (chart.m - 1) * (h2 - chart.m * H**2)
    if check_regular and np.any(rho2 <= cfg.regularity_tol):
        raise RegularityError(
            "totally umbilic locus: conformal factor rho^2 = "
            f"{float(np.min(rho2)):.3e} is not positive"
        )
    rho = np.sqrt(np.maximum(rho2, 0.0))
    frame = triangular_frame(g0)
    return ShapeBatch(chart, U, x, dx, d2x, g0, g0inv, n, h, H, rho, frame)


def shape_data(
    chart: ImmersionChart,
    u: np.ndarray,
    cfg: NumericsConfig = DEFAULT,
    normal_sign: float = 1.0,
) -> ShapeData:
    """Single-point shape data (see ShapeBatch for the batched form)."""
    sb = shape_batch(chart, np.atleast_2d(u), cfg, normal_sign=normal_sign)
    return ShapeData(
        u=sb.U[0],
        x=sb.x[0],
        induced_metric=sb.metric[0],
        normal=sb.normal[0],
        h=sb.h[0],
        h_frame=sb.h_frame()[0],
        H=float(sb.H[0]),
        rho=float(sb.rho[0]),
        frame=sb.frame[0],
        coframe=sb.coframe()[0],
    )


@dataclass
class RegularityReport:
    """Grid diagnostics for the two regularity conditions."""

    chart: str
    n_points: int
    min_rho2: float
    min_metric_eig: float
    max_ambient_residual: float
    max_normal_residual: float
    regular: bool

    def to_dict(self) -> dict:
        return {
            "chart": self.chart,
            "n_points": self.n_points,
            "min_rho2": self.min_rho2,
            "min_metric_eig": self.min_metric_eig,
            "max_ambient_residual": self.max_ambient_residual,
            "max_normal_residual": self.max_normal_residual,
            "regular": self.regular,
        }


def validate_regularity(
    chart: ImmersionChart, U: np.ndarray, cfg: NumericsConfig = DEFAULT
) -> RegularityReport:
    """Report min rho^2, min induced-metric eigenvalue and ambient residuals.

    Never raises on degeneracy: the chart is flagged regular iff all sampled
    points pass both conditions (positive conformal factor, space-like and
    nondegenerate tangent frame).
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    jet = chart.jet(U, 2)
    x, dx, d2x = jet[0], jet[1], jet[2]
    signs = chart.ambient.signature.signs
    g0 = np.einsum("nci,c,ncj->nij", dx, signs, dx)
    eigs = np.linalg.eigvalsh(0.5 * (g0 + np.swapaxes(g0, 1, 2)))
    min_eig = float(np.min(eigs))
    ambient = float(np.max(chart.ambient.quadric_residual(x)))
    rows = np.swapaxes(dx, 1, 2)
    if chart.ambient.kind != LORENTZ_FLAT:
        rows = np.concatenate([rows, x[:, None, :]], axis=1)
    min_rho2 = np.inf
    normal_resid = 0.0
    try:
        n = batched_normal(rows, signs)
        h = -np.einsum("nc,c,ncab->nab", n, signs, d2x)
        g0inv = np.linalg.inv(g0)
        H = np.einsum("nab,nab->n", g0inv, h) / chart.m
        h2 = np.einsum("nab,nag,nbd,ngd->n", h, g0inv, g0inv, h)
        rho2 = chart.m / (chart.m - 1) * (h2 - chart.m * H**2)
        min_rho2 = float(np.min(rho2))
        normal_resid = float(
            max(
                np.max(np.abs(pseudo_dot(n, n, signs) + 1.0)),
                np.max(np.abs(np.einsum("nc,c,nci->ni", n, signs, dx))),
            )
        )
    except RegularityError:
        min_rho2 = 0.0
        normal_resid = np.inf
    tol = cfg.tier(chart.jet_mode == "analytic") if chart.jet_mode == "fd" else cfg.ambient_tol
    regular = (
        min_rho2 > cfg.regularity_tol
        and min_eig > cfg.regularity_tol
        and ambient <= max(tol, cfg.ambient_tol if chart.jet_mode == "analytic" else 1e-6)
    )
    return RegularityReport(
        chart=chart.name,
        n_points=U.shape[0],
        min_rho2=min_rho2,
        min_metric_eig=min_eig,
        max_ambient_residual=ambient,
        max_normal_residual=normal_resid,
        regular=bool(regular),
    )


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def grid_points(box: Box, counts: Iterable[int], margin: float = 0.0) -> np.ndarray:
    """Cartesian product grid inset from the box boundary by `margin`."""
    counts = list(counts)
    if len(counts) == 1:
        counts = counts * box.dim
    if len(counts) != box.dim:
        raise ValidationError(f"need {box.dim} per-axis counts, got {len(counts)}")
    if any(c < 3 for c in counts):
        raise ValidationError("grid counts must be >= 3 per axis")
    lo, hi = box.arrays()
    if np.any(lo + 2 * margin >= hi):
        raise DomainError(f"margin {margin:.3e} leaves an empty domain")
    axes = [np.linspace(lo[i] + margin, hi[i] - margin, counts[i]) for i in range(box.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


# ---------------------------------------------------------------------------
# chart files
# ---------------------------------------------------------------------------

# populated by the catalog module at import time
TEMPLATES: dict[str, Callable[..., ImmersionChart]] = {}


def register_template(name: str, builder: Callable[..., ImmersionChart]) -> None:
    TEMPLATES[name] = builder


def chart_to_dict(chart: ImmersionChart) -> dict:
    if chart.template is None:
        raise ValidationError(
            f"chart {chart.name!r} has no template name and cannot be serialized"
        )
    a = chart.ambient
    return {
        "name": chart.template,
        "m": chart.m,
        "ambient": {"kind": a.kind, "a": a.radius},
        "params": dict(chart.params),
        "domain": {"lo": list(chart.domain.lo), "hi": list(chart.domain.hi)},
        "jet": chart.jet_mode,
        "fd": {"order": chart.fd.order, "step": chart.fd.step},
    }


def chart_from_dict(data: dict) -> ImmersionChart:
    try:
        name = data["name"]
        m = int(data["m"])
        params = dict(data.get("params", {}))
        dom = data["domain"]
        jet_mode = data.get("jet", "analytic")
        fd_data = data.get("fd", {})
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed chart definition: {exc}") from exc
    builder = TEMPLATES.get(name)
    if builder is None:
        raise ValidationError(
            f"unknown chart template {name!r}; available: {sorted(TEMPLATES)}"
        )
    chart = builder(m=m, **params)
    box = Box(tuple(float(v) for v in dom["lo"]), tuple(float(v) for v in dom["hi"]))
    fd = FDConfig(order=int(fd_data.get("order", 4)), step=fd_data.get("step"))
    out = ImmersionChart(
        chart.name,
        chart.m,
        chart.ambient,
        box,
        exprs=chart.exprs,
        syms=chart.syms,
        eval_fn=chart._eval_fn,
        jet_mode=jet_mode,
        fd=fd,
        params=chart.params,
        template=chart.template,
        guards=chart.guards,
    )
    declared = data.get("ambient")
    if declared:
        if declared.get("kind") != out.ambient.kind:
            raise ValidationError(
                f"chart file declares ambient {declared.get('kind')!r} but template "
                f"{name!r} builds {out.ambient.kind!r}"
            )
    return out


def load_chart(path: str | Path) -> ImmersionChart:
    with open(path, "r", encoding="utf-8") as fh:
        return chart_from_dict(json.load(fh))


def save_chart(chart: ImmersionChart, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(chart_to_dict(chart), fh, indent=2, sort_keys=True)
        fh.write("\n")
