"""Decision procedure for hypersurfaces with parallel Blaschke tensor.

Gate order follows the logical dependencies of the classification: the
conformal form is tested after Blaschke parallelism (a parallel Blaschke
tensor forces the form to vanish, so a failure there signals numerics, not
a new branch), the eigenvalue structure only after both.  Branches:

    Isotropic                          t = 1 (Blaschke tensor proportional to g)
    ParallelB                          parallel conformal second fundamental form
    ParallelA-NonParallelB-Positive    t = 2, zero B-block, positive eigenvalue
                                       on the non-degenerate block
    ParallelA-NonParallelB-Negative    same with the negative eigenvalue
    NotParallelA                       hypothesis fails
    Inconclusive                       a gate could not be resolved numerically
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .chart import DE_SITTER, ImmersionChart, grid_points, validate_regularity
from .config import DEFAULT, NumericsConfig
from .conformal_atlas import lift_chart
from .errors import ComputationError, ConsistencyError
from .invariants import InvariantField, evaluate_field, required_margin
from .pseudo_linalg import cluster_eigenvalues, sym_eigen

BRANCH_ISOTROPIC = "Isotropic"
BRANCH_PARALLEL_B = "ParallelB"
BRANCH_POSITIVE = "ParallelA-NonParallelB-Positive"
BRANCH_NEGATIVE = "ParallelA-NonParallelB-Negative"
BRANCH_NOT_PARALLEL_A = "NotParallelA"
BRANCH_INCONCLUSIVE = "Inconclusive"

ANCHORS = {
    BRANCH_ISOTROPIC: "isotropic branch: Blaschke tensor proportional to the metric; "
    "conformally a maximal hypersurface of constant scalar curvature",
    BRANCH_PARALLEL_B: "parallel-B branch: product families and the warped-product cone",
    BRANCH_POSITIVE: "two-block branch, positive eigenvalue on the non-degenerate block: "
    "assembly over a maximal core in a de Sitter quadric",
    BRANCH_NEGATIVE: "two-block branch, negative eigenvalue on the non-degenerate block: "
    "assembly over a maximal core in an anti-de Sitter quadric",
    BRANCH_NOT_PARALLEL_A: "outside the classification: Blaschke tensor not parallel",
    BRANCH_INCONCLUSIVE: "no branch assigned",
}


@dataclass
class EigenStructure:
    """Simultaneous eigenvalue data of the Blaschke tensor and B."""

    t: int
    eigenvalues: list[float]
    multiplicities: list[int]
    b_values: list[list[float]]     # B-block spectra per Blaschke cluster
    zero_block: int | None
    commutator_norm: float
    constancy_deviation: float
    block_b_spread: float           # within-block spread of B (relevant for t >= 3)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "eigenvalues": self.eigenvalues,
            "multiplicities": self.multiplicities,
            "b_values": self.b_values,
            "zero_block": self.zero_block,
            "commutator_norm": self.commutator_norm,
            "constancy_deviation": self.constancy_deviation,
            "block_b_spread": self.block_b_spread,
        }


@dataclass
class ClassificationReport:
    chart: str
    branch: str
    anchor: str
    residuals: dict
    eigen: EigenStructure | None
    tolerances: dict
    grid: dict
    failing_gate: str | None = None
    notes: list[str] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "chart": self.chart,
            "branch": self.branch,
            "anchor": self.anchor,
            "residuals": dict(sorted(self.residuals.items())),
            "eigenstructure": self.eigen.to_dict() if self.eigen else None,
            "tolerances": dict(sorted(self.tolerances.items())),
            "grid": self.grid,
            "failing_gate": self.failing_gate,
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# gates
# ---------------------------------------------------------------------------

def gate_phi(f: InvariantField, tol: float) -> tuple[bool, float]:
    """Vanishing of the conformal form: max |Phi| against tol."""
    norm = float(np.max(f.phi_norm()))
    return norm <= tol, norm


def gate_parallel(dT: np.ndarray, T: np.ndarray, tol: float) -> tuple[bool, float]:
    """Parallelism of a tensor field: max |grad T| <= tol (1 + |T|)."""
    grad = float(np.max(np.sqrt(np.sum(dT**2, axis=tuple(range(1, dT.ndim))))))
    scale = 1.0 + float(np.max(np.abs(T)))
    return grad <= tol * scale, grad


def eigen_structure(f: InvariantField, tol: float) -> EigenStructure:
    """Cluster the Blaschke spectrum and extract simultaneous B-blocks.

    Requires the spectrum to be constant over the grid (the parallel gate
    guarantees this mathematically; deviations beyond tol raise a
    ConsistencyError).  When t >= 2 the commutator with B must vanish;
    B-block eigenvalues are reported per cluster with their grid spread.
    """
    N, m = f.U.shape[0], f.m
    A = 0.5 * (f.A + np.swapaxes(f.A, 1, 2))
    B = 0.5 * (f.B + np.swapaxes(f.B, 1, 2))
    spectra = np.linalg.eigvalsh(A)
    mean_spec = spectra.mean(axis=0)
    scale = max(1.0, float(np.max(np.abs(spectra))))
    constancy = float(np.max(np.abs(spectra - mean_spec[None, :])))
    if constancy > tol * scale:
        raise ConsistencyError(
            f"Blaschke eigenvalues vary over the grid by {constancy:.3e} "
            f"(allowed {tol * scale:.3e}) although the parallel gate passed"
        )
    clusters = cluster_eigenvalues(np.sort(mean_spec), rel_tol=tol)
    t = len(clusters)
    comm = np.einsum("nik,nkj->nij", A, B) - np.einsum("nik,nkj->nij", B, A)
    comm_norm = float(np.max(np.abs(comm)))
    b_values: list[list[float]] = []
    spread = 0.0
    zero_block: int | None = None
    for ci, (lam, mult) in enumerate(clusters):
        block_eigs = np.zeros((N, mult))
        for n in range(N):
            w, Q = sym_eigen(A[n])
            idx = np.where(np.abs(w - lam) <= tol * scale + 1e-14)[0]
            if idx.size != mult:
                # fall back to the `mult` closest eigenvalues
                idx = np.argsort(np.abs(w - lam))[:mult]
            Qb = Q[:, np.sort(idx)]
            Bblock = Qb.T @ B[n] @ Qb
            block_eigs[n] = np.sort(np.linalg.eigvalsh(0.5 * (Bblock + Bblock.T)))
        mean_be = block_eigs.mean(axis=0)
        spread = max(spread, float(np.max(np.abs(block_eigs - mean_be[None, :]))))
        b_values.append([float(v) for v in mean_be])
        if np.max(np.abs(mean_be)) <= tol:
            zero_block = ci if zero_block is None else zero_block
    return EigenStructure(
        t=t,
        eigenvalues=[float(c[0]) for c in clusters],
        multiplicities=[int(c[1]) for c in clusters],
        b_values=b_values,
        zero_block=zero_block,
        commutator_norm=comm_norm,
        constancy_deviation=constancy,
        block_b_spread=spread,
    )


def check_bibj(eigen: EigenStructure) -> float:
    """Cross-block residual of the relation -B_i B_j + A_i + A_j = 0.

    Applicable with t >= 3 or with t = 2 and one vanishing B-block; the max
    over all cross-block value pairs is returned.
    """
    worst = 0.0
    for a in range(eigen.t):
        for b in range(a + 1, eigen.t):
            for Ba in eigen.b_values[a]:
                for Bb in eigen.b_values[b]:
                    worst = max(
                        worst,
                        abs(-Ba * Bb + eigen.eigenvalues[a] + eigen.eigenvalues[b]),
                    )
    return worst


def zero_block_sectional_curvature(
    f: InvariantField, eigen: EigenStructure, tol: float
) -> tuple[float, float] | None:
    """Mean and spread of the sectional curvatures of the zero-B block.

    For the two-block branches this curvature must equal -2 lambda with
    lambda the eigenvalue on the non-degenerate block.  Returns None when
    the zero block is one-dimensional or absent.
    """
    if f.riemann is None or eigen.zero_block is None:
        return None
    lam = eigen.eigenvalues[eigen.zero_block]
    mult = eigen.multiplicities[eigen.zero_block]
    if mult < 2:
        return None
    N = f.U.shape[0]
    scale = max(1.0, float(np.max(np.abs(eigen.eigenvalues))))
    vals = []
    for n in range(N):
        w, Q = sym_eigen(0.5 * (f.A[n] + f.A[n].T))
        idx = np.sort(np.argsort(np.abs(w - lam))[:mult])
        Qb = Q[:, idx]
        Rb = np.einsum("abcd,ai,bj,ck,dl->ijkl", f.riemann[n], Qb, Qb, Qb, Qb)
        for i in range(mult):
            for j in range(i + 1, mult):
                vals.append(Rb[i, j, j, i])
    arr = np.asarray(vals)
    return float(arr.mean()), float(np.max(np.abs(arr - arr.mean())))


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def classify_field(f: InvariantField, tol: float | None = None) -> ClassificationReport:
    """Assign a branch to a precomputed invariant field."""
    cfg = f.cfg
    tol = cfg.classify_tol if tol is None else tol
    tols = {
        "classify_tol": tol,
        "tier_tol": cfg.tier(f.chart.jet_mode == "analytic"),
        "cluster_rtol": cfg.cluster_rtol,
    }
    grid = {"n_points": int(f.U.shape[0]), "m": f.m}
    report = ClassificationReport(
        chart=f.chart.name,
        branch=BRANCH_INCONCLUSIVE,
        anchor=ANCHORS[BRANCH_INCONCLUSIVE],
        residuals={},
        eigen=None,
        tolerances=tols,
        grid=grid,
    )
    ok_a, grad_a = gate_parallel(f.dA, f.A, tol)
    report.residuals["grad_a_norm"] = grad_a
    ok_phi, phi_norm = gate_phi(f, tol)
    report.residuals["phi_norm"] = phi_norm
    ok_b, grad_b = gate_parallel(f.dB, f.B, tol)
    report.residuals["grad_b_norm"] = grad_b
    if not ok_a:
        report.branch = BRANCH_NOT_PARALLEL_A
        report.anchor = ANCHORS[report.branch]
        return report
    if not ok_phi:
        report.failing_gate = "conformal_form"
        report.notes.append(
            "numerical inconsistency: the conformal form does not vanish although "
            "the Blaschke tensor is parallel; this combination is impossible, so "
            "the computation (not the geometry) is at fault"
        )
        return report
    try:
        eigen = eigen_structure(f, tol)
    except ConsistencyError as exc:
        report.failing_gate = "eigenvalue_constancy"
        report.notes.append(str(exc))
        return report
    report.eigen = eigen
    if eigen.t >= 2 and eigen.commutator_norm > tol:
        report.failing_gate = "commutator"
        report.notes.append(
            f"[A, B] norm {eigen.commutator_norm:.3e} exceeds tolerance although "
            "the conformal form vanishes"
        )
        return report
    if eigen.t >= 2:
        report.residuals["bibj_residual"] = check_bibj(eigen)
    if eigen.t == 1:
        report.branch = BRANCH_ISOTROPIC
        report.anchor = ANCHORS[report.branch]
        return report
    if ok_b:
        report.branch = BRANCH_PARALLEL_B
        report.anchor = ANCHORS[report.branch]
        return report
    # non-parallel B: the two-block structure must hold
    if eigen.t != 2:
        report.failing_gate = "two_block_structure"
        report.notes.append(
            f"non-parallel B with t={eigen.t}; the classification admits only t=2 here"
        )
        return report
    lam_sum = eigen.eigenvalues[0] + eigen.eigenvalues[1]
    scale = max(1.0, max(abs(v) for v in eigen.eigenvalues))
    if eigen.zero_block is None or abs(lam_sum) > tol * scale:
        report.failing_gate = "zero_block"
        report.notes.append(
            "non-parallel B requires one vanishing B-block and opposite "
            f"Blaschke eigenvalues; found zero_block={eigen.zero_block}, "
            f"lambda_1 + lambda_2 = {lam_sum:.3e}"
        )
        return report
    nonzero = 1 - eigen.zero_block
    lam = eigen.eigenvalues[nonzero]
    report.notes.append(
        f"zero B-block is cluster {eigen.zero_block} "
        f"(eigenvalue {eigen.eigenvalues[eigen.zero_block]:.6g}, "
        f"multiplicity {eigen.multiplicities[eigen.zero_block]})"
    )
    curv = zero_block_sectional_curvature(f, eigen, tol)
    if curv is not None:
        report.residuals["zero_block_curvature_vs_minus_2lambda"] = abs(curv[0] + 2.0 * lam)
    report.branch = BRANCH_POSITIVE if lam > 0 else BRANCH_NEGATIVE
    report.anchor = ANCHORS[report.branch]
    return report


def classify(
    chart: ImmersionChart,
    counts: int | list[int] = 3,
    cfg: NumericsConfig = DEFAULT,
    tol: float | None = None,
    lift: str = "psi1",
    margin: float | None = None,
) -> ClassificationReport:
    """Full pipeline: regularity, invariants with derivatives, gates.

    Charts in the flat or anti-de Sitter pictures are lifted (default
    through the first coordinate map) before the invariants are computed;
    computation errors annotate the report instead of aborting.
    """
    work = chart
    notes: list[str] = []
    if chart.ambient.kind != DE_SITTER:
        work = lift_chart(chart, lift)
        notes.append(f"lifted to the de Sitter picture via {lift}")
    counts_list = [counts] if isinstance(counts, int) else list(counts)
    if margin is None:
        margin = max(
            required_margin(work, cfg),
            0.05 * min(h - l for l, h in zip(work.domain.lo, work.domain.hi)),
        )
    U = grid_points(work.domain, counts_list, margin=margin)
    reg = validate_regularity(work, U, cfg)
    if not reg.regular:
        rep = ClassificationReport(
            chart=chart.name,
            branch=BRANCH_INCONCLUSIVE,
            anchor=ANCHORS[BRANCH_INCONCLUSIVE],
            residuals={"min_rho2": reg.min_rho2, "min_metric_eig": reg.min_metric_eig},
            eigen=None,
            tolerances={"classify_tol": tol if tol is not None else cfg.classify_tol},
            grid={"n_points": int(U.shape[0]), "m": work.m},
            failing_gate="regularity",
            notes=notes,
        )
        return rep
    try:
        f = evaluate_field(work, U, cfg, derivatives=True, curvature=True)
    except ComputationError as exc:
        return ClassificationReport(
            chart=chart.name,
            branch=BRANCH_INCONCLUSIVE,
            anchor=ANCHORS[BRANCH_INCONCLUSIVE],
            residuals={},
            eigen=None,
            tolerances={"classify_tol": tol if tol is not None else cfg.classify_tol},
            grid={"n_points": int(U.shape[0]), "m": work.m},
            failing_gate="invariant_computation",
            notes=notes + [str(exc)],
        )
    report = classify_field(f, tol)
    report.chart = chart.name
    report.notes = notes + report.notes
    report.grid["counts"] = counts_list
    return report
