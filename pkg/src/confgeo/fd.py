"""Central finite-difference stencils for jets and field derivatives.

Weights are generated by solving the Vandermonde moment system, cached per
(derivative order, accuracy).  Mixed partials use tensor products of 1-d
stencils; derivative orders 3 and 4 get one Richardson step.  Field
derivatives (applied to quantities that are exact per point but sampled,
like the conformal factor over a parameter patch) share the same machinery
with a noise-aware step rule.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Callable

import numpy as np

from .config import FDConfig
from .errors import DomainError


@lru_cache(maxsize=None)
def stencil(deriv: int, accuracy: int) -> tuple[np.ndarray, np.ndarray]:
    """Central offsets and weights for d^deriv/dx^deriv at accuracy order p."""
    if deriv < 1:
        raise ValueError("derivative order must be >= 1")
    n = 2 * ((deriv + 1) // 2) - 1 + accuracy
    if n % 2 == 0:
        n += 1
    r = n // 2
    offs = np.arange(-r, r + 1, dtype=float)
    A = np.vander(offs, n, increasing=True).T
    b = np.zeros(n)
    b[deriv] = math.factorial(deriv)
    w = np.linalg.solve(A, b)
    return offs, w


def max_reach(alpha: tuple[int, ...], accuracy: int) -> int:
    """Largest stencil offset (in units of h) used for multi-index alpha."""
    reach = 0
    for d in alpha:
        if d > 0:
            offs, _ = stencil(d, accuracy)
            reach = max(reach, int(np.max(np.abs(offs))))
    return reach


def _tensor_apply(
    f: Callable[[np.ndarray], np.ndarray],
    U: np.ndarray,
    alpha: tuple[int, ...],
    h: float,
    accuracy: int,
) -> np.ndarray:
    """Tensor-product stencil application of D^alpha to batched f at step h."""
    per_axis: list[tuple[np.ndarray, np.ndarray]] = []
    for d in alpha:
        if d == 0:
            per_axis.append((np.zeros(1), np.ones(1)))
        else:
            offs, w = stencil(d, accuracy)
            per_axis.append((offs, w / h**d))
    total = None
    for combo in itertools.product(*[range(len(o)) for o, _ in per_axis]):
        V = U.copy()
        wprod = 1.0
        for ax, idx in enumerate(combo):
            offs, w = per_axis[ax]
            V[:, ax] = V[:, ax] + offs[idx] * h
            wprod *= w[idx]
        val = f(V)
        term = val * wprod
        total = term if total is None else total + term
    return total


def fd_partial(
    f: Callable[[np.ndarray], np.ndarray],
    U: np.ndarray,
    alpha: tuple[int, ...],
    cfg: FDConfig,
    scale: float | None = None,
    noise: float | None = None,
) -> np.ndarray:
    """Mixed partial D^alpha of a batched map f: (N, m) -> (N, ...).

    The step follows cfg.step_for for the total order; Richardson refinement
    is applied for total orders >= 3 when enabled.
    """
    r = sum(alpha)
    if r == 0:
        return f(U)
    if scale is None:
        scale = float(np.max(np.abs(U))) if U.size else 1.0
    h = cfg.step_for(r, scale=scale, noise=noise)
    if cfg.richardson and r >= 3:
        coarse = _tensor_apply(f, U, alpha, h, cfg.order)
        fine = _tensor_apply(f, U, alpha, h / 2.0, cfg.order)
        gain = 2.0**cfg.order
        return (gain * fine - coarse) / (gain - 1.0)
    return _tensor_apply(f, U, alpha, h, cfg.order)


def field_derivative(
    field: Callable[[np.ndarray], np.ndarray],
    U: np.ndarray,
    axis: int,
    order: int,
    cfg: FDConfig,
    noise: float | None = None,
) -> np.ndarray:
    """Single-axis derivative of a batched field, noise-aware step."""
    alpha = [0] * U.shape[1]
    alpha[axis] = order
    return fd_partial(field, U, tuple(alpha), cfg, noise=noise)


def field_jet12(
    field: Callable[[np.ndarray], np.ndarray],
    U: np.ndarray,
    cfg: FDConfig,
    noise: float | None = None,
    second: bool = True,
) -> tuple[np.ndarray, np.ndarray | None]:
    """First (and optionally second) derivative stacks of a batched field.

    Returns (d1, d2) with d1[..., a] = d f/du_a and d2[..., a, b] the
    symmetric Hessian stack; appended axes come last.  Mixed second
    derivatives nest two first-order stencils at the order-2 step.
    """
    m = U.shape[1]
    d1 = np.stack([field_derivative(field, U, a, 1, cfg, noise=noise) for a in range(m)], axis=-1)
    if not second:
        return d1, None
    base_shape = d1.shape[:-1]
    d2 = np.zeros(base_shape + (m, m))
    scale = float(np.max(np.abs(U))) if U.size else 1.0
    h2 = cfg.step_for(2, scale=scale, noise=noise)
    for a in range(m):
        d2[..., a, a] = field_derivative(field, U, a, 2, cfg, noise=noise)
        for b in range(a + 1, m):
            inner = lambda V, bb=b: _tensor_apply(
                field, V, tuple(1 if i == bb else 0 for i in range(m)), h2, cfg.order
            )
            mixed = _tensor_apply(inner, U, tuple(1 if i == a else 0 for i in range(m)), h2, cfg.order)
            d2[..., a, b] = mixed
            d2[..., b, a] = mixed
    return d1, d2


def check_margin(
    U: np.ndarray, lo: np.ndarray, hi: np.ndarray, margin: float
) -> None:
    """Raise DomainError when any point sits closer than `margin` to the box."""
    low = np.min(U - lo[None, :])
    high = np.min(hi[None, :] - U)
    worst = min(float(low), float(high))
    if worst < margin:
        raise DomainError(
            f"stencil requires margin {margin:.3e} to the domain boundary, "
            f"but a point sits at distance {worst:.3e}"
        )
