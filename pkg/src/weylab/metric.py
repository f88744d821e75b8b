"""Intrinsic metrics on a TriSphere: curvature, Laplacian, conformal scaling,
and the elliptic regularization that lifts Gauss curvature off its degenerate
set by a conformal change of metric."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import MetricError, SolverError
from .mesh import TriSphere

DEFAULT_CG_RTOL = 1e-10


@dataclass
class AmbientSpec:
    """Ambient curvature bound. Only flat Euclidean 3-space is computed; the
    K0 slot keeps report schemas forward-compatible."""

    kind: str = "euclidean"
    K0: float = 0.0

    def __post_init__(self):
        if self.kind != "euclidean":
            raise MetricError(f"unsupported ambient kind {self.kind!r}")
        if self.K0 != 0.0:
            raise MetricError("euclidean ambient requires K0 = 0")


@dataclass
class MetricField:
    """Per-edge lengths defining an intrinsic metric on a TriSphere."""

    mesh: TriSphere
    lengths: np.ndarray

    def __post_init__(self):
        lengths = np.asarray(self.lengths, dtype=np.float64)
        if lengths.shape != (self.mesh.edge_count,):
            raise MetricError(
                f"expected {self.mesh.edge_count} edge lengths, got {lengths.shape}"
            )
        if not np.all(np.isfinite(lengths)) or np.any(lengths <= 0):
            raise MetricError("edge lengths must be positive and finite")
        self.lengths = lengths
        self._check_triangle_inequality()
        self._hash: str | None = None

    def _check_triangle_inequality(self):
        L = self.face_edge_lengths()
        slack = L.sum(axis=1) - 2 * L.max(axis=1)
        bad = np.nonzero(slack <= 0)[0]
        if bad.size:
            f = int(bad[0])
            raise MetricError(
                f"triangle inequality fails in face {f} "
                f"{self.mesh.faces[f].tolist()} with lengths {L[f].tolist()}"
            )

    def face_edge_lengths(self) -> np.ndarray:
        """(F, 3) lengths; column c is the edge opposite corner c."""
        return self.lengths[self.mesh.face_edges]

    def mean_edge(self) -> float:
        return float(self.lengths.mean())

    def metric_hash(self) -> str:
        if self._hash is None:
            doc = {
                "topology_ref": self.mesh.topology_hash(),
                "edge_lengths": self.lengths.tolist(),
            }
            blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
            self._hash = hashlib.sha256(blob.encode()).hexdigest()
        return self._hash


@dataclass
class IntrinsicCurvature:
    """Angle-defect Gauss curvature with mixed Voronoi area weights."""

    K: np.ndarray
    area: np.ndarray
    angle_defect: np.ndarray

    @property
    def total_defect(self) -> float:
        return float(self.angle_defect.sum())


@dataclass
class RegularizationStep:
    """One conformal lift g -> e^{2*eps*lam} g with its bookkeeping."""

    epsilon: float
    lam: np.ndarray
    metric: MetricField
    min_K: float
    predicted_K: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    amplitude_doublings: int = 0
    tau_deg: float = 0.0
    K0: float = 0.0


def induced_metric(mesh: TriSphere, positions: np.ndarray) -> MetricField:
    """Chordal edge lengths of an embedded vertex set."""
    d = positions[mesh.edges[:, 0]] - positions[mesh.edges[:, 1]]
    return MetricField(mesh, np.linalg.norm(d, axis=1))


def corner_angles(g: MetricField) -> np.ndarray:
    """(F, 3) interior angles from the law of cosines; column c is the angle
    at corner c (opposite edge c)."""
    L = g.face_edge_lengths()
    a, b, c = L[:, 0], L[:, 1], L[:, 2]
    cos0 = (b**2 + c**2 - a**2) / (2 * b * c)
    cos1 = (a**2 + c**2 - b**2) / (2 * a * c)
    cos2 = (a**2 + b**2 - c**2) / (2 * a * b)
    cosines = np.stack([cos0, cos1, cos2], axis=1)
    return np.arccos(np.clip(cosines, -1.0, 1.0))


def face_areas(g: MetricField) -> np.ndarray:
    """Heron areas, numerically stabilized (Kahan ordering)."""
    L = np.sort(g.face_edge_lengths(), axis=1)  # a <= b <= c
    a, b, c = L[:, 0], L[:, 1], L[:, 2]
    t = (a + (b + c)) * (c - (b - a)) * (c + (b - a)) * (a + (b - c))
    areas = 0.25 * np.sqrt(np.maximum(t, 0.0))
    if np.any(areas <= 0):
        f = int(np.nonzero(areas <= 0)[0][0])
        raise MetricError(f"degenerate face {f} has zero area")
    return areas


def mixed_voronoi_areas(g: MetricField) -> np.ndarray:
    """Obtuse-safe mixed Voronoi cell areas per vertex (Meyer et al. rule)."""
    mesh = g.mesh
    angles = corner_angles(g)
    areas = face_areas(g)
    L = g.face_edge_lengths()
    cot = np.cos(angles) / np.sin(angles)

    contrib = np.empty_like(angles)
    # Non-obtuse: corner c gets (l_a^2 cot(theta_a) + l_b^2 cot(theta_b)) / 8
    # where a, b are the other two corners.
    for c in range(3):
        a, b = (c + 1) % 3, (c + 2) % 3
        contrib[:, c] = (L[:, a] ** 2 * cot[:, a] + L[:, b] ** 2 * cot[:, b]) / 8.0
    obtuse = angles > np.pi / 2
    any_obtuse = obtuse.any(axis=1)
    for c in range(3):
        rows = any_obtuse
        contrib[rows, c] = np.where(obtuse[rows, c], areas[rows] / 2, areas[rows] / 4)

    out = np.zeros(mesh.vertex_count)
    np.add.at(out, mesh.faces.ravel(), contrib.ravel())
    return out


def angle_defect_curvature(g: MetricField) -> IntrinsicCurvature:
    """Gauss curvature as angle defect over mixed area; defects sum to 4*pi."""
    mesh = g.mesh
    angles = corner_angles(g)
    defect = np.full(mesh.vertex_count, 2 * np.pi)
    np.subtract.at(defect, mesh.faces.ravel(), angles.ravel())
    area = mixed_voronoi_areas(g)
    return IntrinsicCurvature(K=defect / area, area=area, angle_defect=defect)


def cotan_laplacian(g: MetricField) -> sp.csr_matrix:
    """Intrinsic cotangent stiffness matrix L (positive semidefinite,
    kernel = constants). The Laplace-Beltrami operator is
    ``Delta u = -(L @ u) / mixed_voronoi_areas(g)``."""
    mesh = g.mesh
    angles = corner_angles(g)
    sines = np.sin(angles)
    if np.any(sines <= 0):
        f = int(np.nonzero((sines <= 0).any(axis=1))[0][0])
        raise MetricError(f"degenerate face {f}: zero angle")
    cot = np.cos(angles) / sines

    w = np.zeros(mesh.edge_count)
    np.add.at(w, mesh.face_edges.ravel(), 0.5 * cot.ravel())

    u, v = mesh.edges[:, 0], mesh.edges[:, 1]
    rows = np.concatenate([u, v, u, v])
    cols = np.concatenate([v, u, u, v])
    vals = np.concatenate([-w, -w, w, w])
    n = mesh.vertex_count
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def laplace_beltrami(g: MetricField, u: np.ndarray,
                     L: sp.spmatrix | None = None,
                     area: np.ndarray | None = None) -> np.ndarray:
    if L is None:
        L = cotan_laplacian(g)
    if area is None:
        area = mixed_voronoi_areas(g)
    return -(L @ u) / area


def conformal_scale(g: MetricField, u: np.ndarray) -> MetricField:
    """Edge-midpoint conformal scaling: l_ij -> exp((u_i + u_j)/2) * l_ij."""
    u = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(u)):
        raise MetricError("conformal factor must be finite")
    i, j = g.mesh.edges[:, 0], g.mesh.edges[:, 1]
    return MetricField(g.mesh, np.exp(0.5 * (u[i] + u[j])) * g.lengths)


def solve_poisson(L: sp.spmatrix, area: np.ndarray, rho: np.ndarray,
                  rtol: float = DEFAULT_CG_RTOL) -> np.ndarray:
    """Solve -Delta u = rho, i.e. L u = area * rho, by conjugate gradient.

    rho must have area-weighted mean zero (range of the operator); the
    returned u is gauged to arithmetic mean zero.
    """
    b = area * rho
    total = float(np.abs(b).sum())
    if total == 0.0:
        return np.zeros_like(rho)
    b = b - b.mean()  # project roundoff residue off the kernel
    x, info = spla.cg(L, b, rtol=rtol, atol=0.0, maxiter=20 * len(rho))
    if info != 0:
        raise SolverError(f"Poisson CG did not converge (info={info})")
    return x - x.mean()


def regularize(g: MetricField, epsilon: float, K0: float = 0.0,
               tau_deg: float | None = None,
               max_doublings: int = 8) -> RegularizationStep:
    """Conformally lift the curvature of g strictly above K0.

    Solves -Delta lam = rho for a source rho supported on the near-degenerate
    region {K - K0 < tau_deg} (tapering linearly to zero past 2*tau_deg,
    then centered to have area-weighted mean zero), and scales edge lengths
    by exp(epsilon * lam) at edge midpoints. If the curvature of the scaled
    metric does not clear K0, the source amplitude is doubled, up to
    ``max_doublings`` times.
    """
    if epsilon <= 0:
        raise MetricError(f"epsilon must be positive, got {epsilon}")
    intr = angle_defect_curvature(g)
    excess = intr.K - K0
    sup = float(excess.max())
    if sup <= 0:
        raise MetricError("metric has no curvature above K0 anywhere")
    if float(excess.min()) < -1e-6 * sup:
        raise MetricError(
            f"metric curvature dips below K0 by {-excess.min():.3e}; "
            "not degenerate-elliptic"
        )
    tau = 0.05 * sup if tau_deg is None else float(tau_deg)

    core = excess < tau
    if not core.any():
        # Already strictly elliptic at threshold scale: nothing to lift.
        zeros = np.zeros(g.mesh.vertex_count)
        return RegularizationStep(
            epsilon=epsilon, lam=zeros, metric=g,
            min_K=float(intr.K.min()), predicted_K=intr.K.copy(),
            rho=zeros, amplitude_doublings=0, tau_deg=tau, K0=K0,
        )

    rho_raw = np.clip((2 * tau - excess) / tau, 0.0, 1.0)
    area = intr.area
    rho_base = rho_raw - float((rho_raw * area).sum() / area.sum())
    L = cotan_laplacian(g)
    lam_base = solve_poisson(L, area, rho_base)

    for doublings in range(max_doublings + 1):
        amp = 2.0**doublings
        lam = amp * lam_base
        rho = amp * rho_base
        scaled = conformal_scale(g, epsilon * lam)
        new_K = angle_defect_curvature(scaled).K
        min_K = float(new_K.min())
        if min_K > K0:
            predicted = (intr.K + epsilon * rho) * np.exp(-2 * epsilon * lam)
            return RegularizationStep(
                epsilon=epsilon, lam=lam, metric=scaled, min_K=min_K,
                predicted_K=predicted, rho=rho,
                amplitude_doublings=doublings, tau_deg=tau, K0=K0,
            )
    raise SolverError(
        f"regularization at epsilon={epsilon} failed to lift curvature above "
        f"K0={K0} after {max_doublings} amplitude doublings"
    )


def conformal_equation_residual(g: MetricField, step: RegularizationStep) -> np.ndarray:
    """Per-vertex residual of the conformal curvature equation
    -eps*Delta(lam) + K = K_eps * exp(2*eps*lam), recomputed from scratch."""
    intr = angle_defect_curvature(g)
    dlam = laplace_beltrami(g, step.lam, area=intr.area)
    return (-step.epsilon * dlam + intr.K
            - step.predicted_K * np.exp(2 * step.epsilon * step.lam))
