"""Edge-length least-squares embedding into Euclidean 3-space.

The energy is E(x) = sum_e w_e (|x_i - x_j|^2 - l_e^2)^2 + beta * sum_e
|n_a - n_b|^2 over unit normals of the two faces at each edge, with
w_e = 1/l_e^4 for scale invariance. A decreasing bending schedule biases the
solver toward the convex branch; Gauss-Newton steps come from the sparse
normal equations via conjugate gradient with an Armijo line search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import MeshError, MetricError, SolverError
from .mesh import TriSphere, icosphere_positions
from .metric import (
    MetricField,
    RegularizationStep,
    angle_defect_curvature,
    cotan_laplacian,
    face_areas,
    mixed_voronoi_areas,
    regularize,
)

DEGENERATE_AREA_FACTOR = 1e-12  # faces must keep area > this * (mean edge)^2


class RoundInit:
    """Start from the round sphere whose area matches the metric's."""


class SpectralInit:
    """Start from the first three nontrivial Laplacian eigenvectors."""


@dataclass
class SolverConfig:
    max_iterations: int = 150          # Gauss-Newton steps per bending stage
    gradient_tol: float = 3e-10        # on mean_edge * max |grad E|
    residual_tol: float = 1e-6         # relative RMS edge-length error
    bend_schedule: tuple[float, ...] = (3e-2, 3e-3, 3e-4, 0.0)
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-14
    cg_rtol: float = 1e-7
    cg_maxiter: int = 500

    def __post_init__(self):
        if self.gradient_tol <= 0 or self.residual_tol <= 0:
            raise SolverError("tolerances must be positive")
        sched = tuple(float(b) for b in self.bend_schedule)
        if not sched or any(b < 0 for b in sched):
            raise SolverError("bending schedule must be nonnegative")
        if any(b1 <= b2 for b1, b2 in zip(sched, sched[1:])):
            raise SolverError("bending schedule must be strictly decreasing")
        self.bend_schedule = sched


@dataclass
class EmbeddingState:
    """Vertex positions realizing (approximately) a MetricField."""

    positions: np.ndarray
    metric_ref: str
    residual: float
    converged: bool
    iterations: int = 0
    grad_norm: float = float("nan")

    def copy(self) -> "EmbeddingState":
        return EmbeddingState(self.positions.copy(), self.metric_ref,
                              self.residual, self.converged,
                              self.iterations, self.grad_norm)


@dataclass
class SweepMember:
    epsilon: float
    reg: RegularizationStep | None = None
    embedding: EmbeddingState | None = None
    report: object | None = None       # CurvatureReport, filled by analysis
    intr: object | None = None         # IntrinsicCurvature of reg.metric
    error: str | None = None


@dataclass
class SweepResult:
    """Indexed family over decreasing epsilon of regularization + embedding
    (reports and verdicts attached downstream)."""

    base_metric: MetricField
    K0: float
    members: list[SweepMember] = field(default_factory=list)

    @property
    def epsilons(self) -> list[float]:
        return [m.epsilon for m in self.members]

    def ok_members(self) -> list[SweepMember]:
        return [m for m in self.members if m.error is None]

    def all_converged(self) -> bool:
        return all(
            m.error is None and m.embedding is not None and m.embedding.converged
            for m in self.members
        )


def _cross_matrices(v: np.ndarray) -> np.ndarray:
    """(..., 3) vectors -> (..., 3, 3) matrices C with C @ d = v x d."""
    out = np.zeros(v.shape[:-1] + (3, 3))
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


class _Problem:
    """Residuals and sparse Jacobian of the embedding energy at fixed beta."""

    def __init__(self, mesh: TriSphere, lengths: np.ndarray, beta: float):
        self.mesh = mesh
        self.lengths = lengths
        self.mean_edge = float(lengths.mean())
        self.sqrt_w = 1.0 / lengths**2  # sqrt(1/l^4)
        self.beta = float(beta)
        self.n = mesh.vertex_count
        self._build_index_maps()

    def _build_index_maps(self):
        mesh = self.mesh
        E = mesh.edge_count
        i, j = mesh.edges[:, 0], mesh.edges[:, 1]
        # Length rows: 3 columns per endpoint.
        cols = np.stack([3 * i, 3 * i + 1, 3 * i + 2,
                         3 * j, 3 * j + 1, 3 * j + 2], axis=1)
        rows = np.repeat(np.arange(E)[:, None], 6, axis=1)
        self._len_rows = rows.ravel()
        self._len_cols = cols.ravel()

        if self.beta > 0:
            # Bending rows: 3 per edge, coupling the 3 corners of both faces.
            fa = mesh.edge_faces[:, 0]
            fb = mesh.edge_faces[:, 1]
            self._bend_faces = (fa, fb)
            rows = []
            cols = []
            base = np.arange(E) * 3
            for f_side in (fa, fb):
                corner_verts = mesh.faces[f_side]          # (E, 3)
                for c in range(3):
                    vcols = 3 * corner_verts[:, c]
                    rr, cc = np.meshgrid(np.arange(3), np.arange(3), indexing="ij")
                    rows.append(base[:, None, None] + rr[None])
                    cols.append(vcols[:, None, None] + cc[None])
            self._bend_rows = np.concatenate([a.ravel() for a in rows])
            self._bend_cols = np.concatenate([a.ravel() for a in cols])

    def _face_normals(self, x: np.ndarray):
        f = self.mesh.faces
        e1 = x[f[:, 1]] - x[f[:, 0]]
        e2 = x[f[:, 2]] - x[f[:, 0]]
        n = np.cross(e1, e2)
        norms = np.linalg.norm(n, axis=1)
        return n, norms

    def min_face_area(self, x: np.ndarray) -> float:
        _, norms = self._face_normals(x)
        return float(norms.min()) / 2.0

    def residuals(self, x: np.ndarray) -> np.ndarray:
        mesh = self.mesh
        d = x[mesh.edges[:, 0]] - x[mesh.edges[:, 1]]
        q = np.einsum("ij,ij->i", d, d)
        r_len = self.sqrt_w * (q - self.lengths**2)
        if self.beta == 0:
            return r_len
        n, norms = self._face_normals(x)
        nhat = n / norms[:, None]
        fa, fb = self._bend_faces
        r_bend = np.sqrt(self.beta) * (nhat[fa] - nhat[fb])
        return np.concatenate([r_len, r_bend.ravel()])

    def residuals_and_jacobian(self, x: np.ndarray):
        mesh = self.mesh
        E = mesh.edge_count
        d = x[mesh.edges[:, 0]] - x[mesh.edges[:, 1]]
        q = np.einsum("ij,ij->i", d, d)
        r_len = self.sqrt_w * (q - self.lengths**2)
        g = 2.0 * self.sqrt_w[:, None] * d
        len_vals = np.concatenate([g, -g], axis=1).ravel()

        if self.beta == 0:
            J = sp.coo_matrix(
                (len_vals, (self._len_rows, self._len_cols)),
                shape=(E, 3 * self.n),
            ).tocsr()
            return r_len, J

        n, norms = self._face_normals(x)
        nhat = n / norms[:, None]
        fa, fb = self._bend_faces
        sqb = np.sqrt(self.beta)
        r_bend = sqb * (nhat[fa] - nhat[fb])

        # d nhat / d x_corner = (I - nhat nhat^T)/|n| @ [opposite edge]_x
        f = self.mesh.faces
        opp = np.stack(
            [x[f[:, 2]] - x[f[:, 1]],
             x[f[:, 0]] - x[f[:, 2]],
             x[f[:, 1]] - x[f[:, 0]]],
            axis=1,
        )  # (F, corner, 3)
        C = _cross_matrices(opp)  # (F, 3, 3, 3)
        P = (np.eye(3)[None] - nhat[:, :, None] * nhat[:, None, :]) / norms[:, None, None]
        blocks = np.einsum("fij,fcjk->fcik", P, C)  # (F, corner, 3, 3)

        vals = []
        for f_side, sign in ((fa, 1.0), (fb, -1.0)):
            side_blocks = sign * sqb * blocks[f_side]      # (E, corner, 3, 3)
            for c in range(3):
                vals.append(side_blocks[:, c].ravel())
        bend_vals = np.concatenate(vals)

        rows = np.concatenate([self._len_rows, E + self._bend_rows])
        cols = np.concatenate([self._len_cols, self._bend_cols])
        data = np.concatenate([len_vals, bend_vals])
        J = sp.coo_matrix((data, (rows, cols)), shape=(E + 3 * E, 3 * self.n)).tocsr()
        return np.concatenate([r_len, r_bend.ravel()]), J

    def energy(self, x: np.ndarray) -> float:
        r = self.residuals(x)
        return float(r @ r)

    def relative_residual(self, x: np.ndarray) -> float:
        mesh = self.mesh
        d = x[mesh.edges[:, 0]] - x[mesh.edges[:, 1]]
        rel = (np.linalg.norm(d, axis=1) - self.lengths) / self.lengths
        return float(np.sqrt(np.mean(rel**2)))


def relative_residual(g: MetricField, positions: np.ndarray) -> float:
    """Relative RMS edge-length error of positions against a metric."""
    d = positions[g.mesh.edges[:, 0]] - positions[g.mesh.edges[:, 1]]
    rel = (np.linalg.norm(d, axis=1) - g.lengths) / g.lengths
    return float(np.sqrt(np.mean(rel**2)))


def round_init(g: MetricField) -> np.ndarray:
    """Round sphere of area matching the metric's total area."""
    if g.mesh.level < 0:
        raise MeshError("RoundInit needs an icosphere-levelled mesh")
    area = float(face_areas(g).sum())
    radius = np.sqrt(area / (4 * np.pi))
    return radius * icosphere_positions(g.mesh.level)


def spectral_init(g: MetricField) -> np.ndarray:
    """First three nontrivial eigenvectors of the intrinsic Laplacian,
    scaled to the area-matching sphere radius."""
    L = cotan_laplacian(g)
    area = mixed_voronoi_areas(g)
    M = sp.diags(area)
    v0 = np.linspace(1.0, 2.0, g.mesh.vertex_count)
    vals, vecs = spla.eigsh(L.tocsc(), k=4, M=M.tocsc(), sigma=-1e-8, v0=v0)
    order = np.argsort(vals)
    coords = vecs[:, order[1:4]]
    for c in range(3):
        k = int(np.argmax(np.abs(coords[:, c])))
        if coords[k, c] < 0:
            coords[:, c] = -coords[:, c]
    total_area = float(face_areas(g).sum())
    radius = np.sqrt(total_area / (4 * np.pi))
    rms = np.sqrt(np.mean(np.sum(coords**2, axis=1)))
    return coords * (radius / rms)


def _gauge_fix(mesh: TriSphere, x: np.ndarray) -> np.ndarray:
    """Pin centroid at the origin, make face normals outward, and fix the
    net rotation by the frame of vertices 0 and 1."""
    x = x - x.mean(axis=0)
    f = mesh.faces
    n = np.cross(x[f[:, 1]] - x[f[:, 0]], x[f[:, 2]] - x[f[:, 0]])
    centroids = (x[f[:, 0]] + x[f[:, 1]] + x[f[:, 2]]) / 3.0
    if float(np.einsum("ij,ij->i", n, centroids).mean()) < 0:
        x = x * np.array([-1.0, 1.0, 1.0])  # reflect: orientation now outward
    w = x[0] / np.linalg.norm(x[0])
    u = x[1] - np.dot(x[1], w) * w
    nu = np.linalg.norm(u)
    if nu < 1e-12 * np.linalg.norm(x[1]):
        raise SolverError("gauge frame degenerate: vertices 0 and 1 collinear")
    u /= nu
    v = np.cross(w, u)
    R = np.stack([u, v, w])
    x = x @ R.T
    return x - x.mean(axis=0)


def embed(g: MetricField, init, cfg: SolverConfig | None = None) -> EmbeddingState:
    """Locally minimize the edge-length energy from the given initialization.

    Requires a strictly elliptic metric (intrinsic K > 0 at every vertex).
    Returns the best state with converged=False on iteration exhaustion;
    raises SolverError if degenerate faces block the line search persistently.
    """
    cfg = cfg or SolverConfig()
    intr = angle_defect_curvature(g)
    if float(intr.K.min()) <= 0:
        raise MetricError(
            f"metric is not strictly elliptic: min intrinsic K = {intr.K.min():.3e}"
        )

    if isinstance(init, EmbeddingState):
        x = np.array(init.positions, dtype=np.float64, copy=True)
    elif isinstance(init, RoundInit):
        x = round_init(g)
    elif isinstance(init, SpectralInit):
        x = spectral_init(g)
    elif isinstance(init, np.ndarray):
        x = np.array(init, dtype=np.float64, copy=True)
    else:
        raise SolverError(f"unsupported init {type(init).__name__}")
    if x.shape != (g.mesh.vertex_count, 3):
        raise SolverError(f"init has shape {x.shape}, expected ({g.mesh.vertex_count}, 3)")

    mean_edge = g.mean_edge()
    area_floor = DEGENERATE_AREA_FACTOR * mean_edge**2
    probe = _Problem(g.mesh, g.lengths, 0.0)
    if probe.min_face_area(x) <= area_floor:
        raise SolverError("initial embedding has a degenerate face")

    total_iters = 0
    grad_norm = np.inf
    schedule = cfg.bend_schedule

    # Already at an optimum: zero iterations needed.
    r0, J0 = probe.residuals_and_jacobian(x)
    g0 = 2.0 * (J0.T @ r0)
    grad_norm = float(np.abs(g0).max()) * mean_edge
    if grad_norm < cfg.gradient_tol and probe.relative_residual(x) < cfg.residual_tol:
        x = _gauge_fix(g.mesh, x)
        return EmbeddingState(x, g.metric_hash(), probe.relative_residual(x),
                              True, 0, grad_norm)

    for beta in schedule:
        problem = _Problem(g.mesh, g.lengths, beta)
        energy = problem.energy(x)
        stuck_degenerate = 0
        for _ in range(cfg.max_iterations):
            r, J = problem.residuals_and_jacobian(x)
            grad = 2.0 * (J.T @ r)
            grad_norm = float(np.abs(grad).max()) * mean_edge
            if grad_norm < cfg.gradient_tol:
                break

            A = (J.T @ J).tocsr()
            nu = 1e-12 * float(A.diagonal().mean())
            A_reg = A + nu * sp.identity(A.shape[0])
            p, info = spla.cg(A_reg, -grad / 2.0, rtol=cfg.cg_rtol, atol=0.0,
                              maxiter=cfg.cg_maxiter)
            descent = float(grad @ p)
            if info < 0 or not np.isfinite(descent) or descent >= 0:
                # CG breakdown: steepest descent scaled by the diagonal.
                p = -grad / float(A.diagonal().max())
                descent = float(grad @ p)

            alpha = 1.0
            step = p.reshape(-1, 3)
            accepted = False
            hit_degenerate = False
            while alpha >= cfg.min_step:
                x_try = x + alpha * step
                if problem.min_face_area(x_try) <= area_floor:
                    hit_degenerate = True
                    alpha *= cfg.backtrack
                    continue
                e_try = problem.energy(x_try)
                if e_try <= energy + cfg.armijo_c1 * alpha * descent:
                    accepted = True
                    break
                alpha *= cfg.backtrack
            if not accepted:
                if hit_degenerate:
                    stuck_degenerate += 1
                    if stuck_degenerate >= 3:
                        raise SolverError(
                            "line search blocked by degenerate faces in 3 "
                            "consecutive iterations"
                        )
                break  # stage stagnated; move down the schedule
            if e_try > energy + 1e-12 * (1.0 + energy):
                raise SolverError("energy increased across an accepted step")
            stuck_degenerate = 0
            x = x_try
            energy = e_try
            total_iters += 1

    final_residual = probe.relative_residual(x)
    r, J = probe.residuals_and_jacobian(x)
    grad_norm = float(np.abs(2.0 * (J.T @ r)).max()) * mean_edge
    converged = bool(grad_norm < cfg.gradient_tol and final_residual < cfg.residual_tol)
    x = _gauge_fix(g.mesh, x)
    return EmbeddingState(x, g.metric_hash(), final_residual, converged,
                          total_iters, grad_norm)


def continuation_sweep(g: MetricField, epsilons, K0: float = 0.0,
                       cfg: SolverConfig | None = None,
                       tau_deg: float | None = None) -> SweepResult:
    """Regularize and embed over a strictly decreasing epsilon family,
    warm-starting each solve from the previous one (round init first).

    A per-epsilon failure is recorded on its member with the failing stage
    tagged; earlier members are preserved and later ones are not attempted.
    """
    epsilons = [float(e) for e in epsilons]
    if any(e <= 0 for e in epsilons):
        raise MetricError("all epsilons must be positive")
    if any(e1 <= e2 for e1, e2 in zip(epsilons, epsilons[1:])):
        raise MetricError("epsilons must be strictly decreasing")
    cfg = cfg or SolverConfig()

    out = SweepResult(base_metric=g, K0=K0)
    prev: EmbeddingState | None = None
    for eps in epsilons:
        member = SweepMember(epsilon=eps)
        out.members.append(member)
        try:
            member.reg = regularize(g, eps, K0=K0, tau_deg=tau_deg)
        except (MetricError, SolverError) as exc:
            member.error = f"regularize: {exc}"
            break
        try:
            init = prev if prev is not None else RoundInit()
            member.embedding = embed(member.reg.metric, init, cfg)
        except (MetricError, SolverError) as exc:
            member.error = f"embed: {exc}"
            break
        prev = member.embedding
    return out
