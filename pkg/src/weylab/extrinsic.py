"""Extrinsic curvature estimation on embedded surfaces: per-vertex quadric
fits of the shape operator, the intrinsically-sourced relative curvature
k^2, and surface integrals of mean curvature."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embed import EmbeddingState
from .errors import SolverError
from .mesh import TriSphere
from .metric import (
    AmbientSpec,
    IntrinsicCurvature,
    MetricField,
    angle_defect_curvature,
    induced_metric,
    mixed_voronoi_areas,
)

MIN_STENCIL = 6
H_FLOOR_FACTOR = 1e-12       # W undefined where H <= factor / mean_edge
GAUSS_FLOOR_FRACTION = 1e-3  # denominator floor for gauss_residual


@dataclass
class CurvatureReport:
    """Per-vertex intrinsic and extrinsic curvature of one embedding.

    kappa1 <= kappa2 with the outward-positive sign convention (convex
    sphere has kappa = +1/R). H = (kappa1 + kappa2)/2. k_sq is the
    intrinsically-sourced relative curvature (= intrinsic K in Euclidean
    ambient); kappa1*kappa2 enters only through gauss_residual, the
    discrete Gauss-equation consistency diagnostic. W = 1/H where H is
    positive, NaN where undefined.
    """

    K_intr: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    H: np.ndarray
    k_sq: np.ndarray
    W: np.ndarray
    area_weight: np.ndarray
    gauss_residual: np.ndarray
    clamped: np.ndarray
    mean_edge: float
    fit_ring: int
    epsilon: float | None = None

    @property
    def k(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.k_sq, 0.0))

    @property
    def W_defined(self) -> np.ndarray:
        return np.isfinite(self.W)

    @property
    def clamp_count(self) -> int:
        return int(self.clamped.sum())


def vertex_normals(mesh: TriSphere, positions: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals (sum of incident face cross products)."""
    f = mesh.faces
    fn = np.cross(positions[f[:, 1]] - positions[f[:, 0]],
                  positions[f[:, 2]] - positions[f[:, 0]])
    out = np.zeros_like(positions)
    np.add.at(out, f[:, 0], fn)
    np.add.at(out, f[:, 1], fn)
    np.add.at(out, f[:, 2], fn)
    norms = np.linalg.norm(out, axis=1)
    if np.any(norms == 0):
        v = int(np.nonzero(norms == 0)[0][0])
        raise SolverError(f"zero area-weighted normal at vertex {v}")
    return out / norms[:, None]


def _ring_stencils(mesh: TriSphere, ring: int) -> list[np.ndarray]:
    """Per-vertex neighbor stencils, grown past ``ring`` hops until each has
    at least MIN_STENCIL members (center excluded)."""
    stencils = []
    for v in range(mesh.vertex_count):
        ball = {v}
        frontier = [v]
        hops = 0
        while hops < ring or len(ball) - 1 < MIN_STENCIL:
            nxt = []
            for u in frontier:
                for w in mesh.neighbors[u]:
                    w = int(w)
                    if w not in ball:
                        ball.add(w)
                        nxt.append(w)
            frontier = nxt
            hops += 1
            if not nxt:
                break
        ball.discard(v)
        stencils.append(np.array(sorted(ball), dtype=np.int64))
    return stencils


def shape_operator_fit(emb: EmbeddingState, mesh: TriSphere,
                       ring: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Principal curvatures (kappa1 <= kappa2) from per-vertex quadric fits.

    In the frame of the area-weighted normal, the stencil displacements are
    fit to z = p x + q y + (a x^2 + 2 b x y + c y^2)/2; the linear part
    absorbs normal-estimate error and the eigenvalues of -[[a,b],[b,c]]
    are the curvatures (positive toward the outward normal).
    """
    if ring not in (1, 2):
        raise SolverError(f"fit ring must be 1 or 2, got {ring}")
    x = emb.positions
    normals = vertex_normals(mesh, x)
    stencils = _ring_stencils(mesh, ring)

    n_v = mesh.vertex_count
    kappa1 = np.empty(n_v)
    kappa2 = np.empty(n_v)
    axes = np.eye(3)
    for v in range(n_v):
        nv = normals[v]
        ref = axes[int(np.argmin(np.abs(nv)))]
        t1 = ref - np.dot(ref, nv) * nv
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(nv, t1)

        d = x[stencils[v]] - x[v]
        scale = np.sqrt(np.mean(np.einsum("ij,ij->i", d, d)))
        d = d / scale  # O(1) design matrix keeps the fit well-conditioned
        xi = d @ t1
        eta = d @ t2
        zeta = d @ nv
        cols = np.stack([xi, eta, 0.5 * xi**2, xi * eta, 0.5 * eta**2], axis=1)
        coef, _, rank, _ = np.linalg.lstsq(cols, zeta, rcond=None)
        if rank < 5:
            raise SolverError(f"rank-deficient curvature fit at vertex {v}")
        a, b, c = coef[2] / scale, coef[3] / scale, coef[4] / scale
        # Outward normal, convex surface: stencil lies below the tangent
        # plane, so the Hessian is negative; flip the sign. hypot form keeps
        # the eigenvalue split stable at umbilic points.
        half_trace = -(a + c) / 2.0
        disc = np.hypot((a - c) / 2.0, b)
        kappa1[v] = half_trace - disc
        kappa2[v] = half_trace + disc
    return kappa1, kappa2


def relative_curvature(kappa1: np.ndarray, kappa2: np.ndarray,
                       intr: IntrinsicCurvature,
                       ambient: AmbientSpec | None = None):
    """Relative curvature k^2 from intrinsic data and the Gauss-equation
    consistency residual |kappa1*kappa2 - K_intr| / max(K_intr, floor).

    Negative k^2 is clamped to zero for k, with the clamp recorded.
    """
    ambient = ambient or AmbientSpec()
    k_sq = intr.K - ambient.K0
    clamped = k_sq < 0
    sup = float(np.abs(intr.K).max())
    floor = GAUSS_FLOOR_FRACTION * sup if sup > 0 else 1.0
    denom = np.maximum(intr.K, floor)
    gauss_residual = np.abs(kappa1 * kappa2 - intr.K) / denom
    return k_sq, gauss_residual, clamped


def curvature_report(emb: EmbeddingState, g: MetricField, ring: int = 2,
                     epsilon: float | None = None,
                     ambient: AmbientSpec | None = None,
                     intr: IntrinsicCurvature | None = None) -> CurvatureReport:
    """Full per-vertex report for an embedding of a metric: quadric-fit
    extrinsic curvatures plus the intrinsically-sourced k^2."""
    mesh = g.mesh
    if intr is None:
        intr = angle_defect_curvature(g)
    kappa1, kappa2 = shape_operator_fit(emb, mesh, ring=ring)
    H = 0.5 * (kappa1 + kappa2)
    k_sq, gauss_residual, clamped = relative_curvature(kappa1, kappa2, intr, ambient)

    realized = induced_metric(mesh, emb.positions)
    area_weight = mixed_voronoi_areas(realized)
    mean_edge = realized.mean_edge()
    h_floor = H_FLOOR_FACTOR / mean_edge
    W = np.where(H > h_floor, 1.0 / np.where(H > h_floor, H, 1.0), np.nan)

    return CurvatureReport(
        K_intr=intr.K.copy(), kappa1=kappa1, kappa2=kappa2, H=H,
        k_sq=k_sq, W=W, area_weight=area_weight,
        gauss_residual=gauss_residual, clamped=clamped,
        mean_edge=mean_edge, fit_ring=ring, epsilon=epsilon,
    )


def total_mean_curvature(report: CurvatureReport) -> float:
    """Surface integral of H with mixed Voronoi weights."""
    if not np.all(np.isfinite(report.H)):
        raise SolverError("mean curvature is not finite everywhere")
    return float((report.H * report.area_weight).sum())
