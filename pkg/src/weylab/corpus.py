"""Ground-truth test surfaces: round spheres, spheroids, and convex surfaces
of revolution whose Gauss curvature vanishes at a pole or on a latitude
circle. Each generator returns an exactly realized (metric, embedding) pair,
so the embedder always has a known global optimum."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .embed import EmbeddingState
from .errors import InputError, MetricError
from .mesh import TriSphere, icosphere, icosphere_positions
from .metric import MetricField, angle_defect_curvature, induced_metric

PROFILE_SAMPLES = 20001
ZERO_SET_FRACTION = 1e-2  # K below this fraction of sup K counts as degenerate
NEG_K_CERTIFICATE = 1e-8  # min K must exceed -NEG_K_CERTIFICATE * sup K
# Inscribed-chord noise in discrete curvature is O(kappa^2 h^2) where the
# surface bends in one direction only; a flat latitude circle needs this much
# density floor to keep the sampled metric degenerate-elliptic at level <= 6.
CIRCLE_DENSITY_FLOOR = 4e-3


@dataclass
class RevolutionProfile:
    """Arclength-sampled generatrix of a convex surface of revolution.

    The tangent turning angle psi runs from 0 to pi, so both ends close at
    poles; Gauss curvature along the profile is psi' * sin(psi) / r.
    """

    s: np.ndarray
    r: np.ndarray
    z: np.ndarray
    psi: np.ndarray
    K_profile: np.ndarray
    flatness: dict
    area_cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        interior = self.r[1:-1]
        if np.any(interior <= 0):
            raise MetricError("profile radius must be positive away from the poles")
        if np.any(np.diff(self.psi) < -1e-12):
            raise MetricError("profile is not convex: turning angle decreases")
        self.area_cumulative = 2 * np.pi * _cumtrapz(self.r, self.s)

    @property
    def total_area(self) -> float:
        return float(self.area_cumulative[-1])

    def map_polar(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Map unit-sphere polar coordinates onto the surface, equalizing
        area: the surface-area fraction above the image latitude matches the
        spherical-cap fraction (1 - cos(theta)) / 2."""
        target = self.total_area * 0.5 * (1.0 - np.cos(theta))
        s = np.interp(target, self.area_cumulative, self.s)
        r = np.maximum(np.interp(s, self.s, self.r), 0.0)
        z = np.interp(s, self.s, self.z)
        height = self.z[-1]
        return np.stack(
            [r * np.cos(phi), r * np.sin(phi), height / 2 - z], axis=1
        )


@dataclass
class GeneratedSurface:
    """(mesh, metric, embedding) triple; iterable for tuple unpacking."""

    mesh: TriSphere
    metric: MetricField
    embedding: EmbeddingState
    profile: RevolutionProfile | None = None
    zero_set: np.ndarray | None = None

    def __iter__(self):
        return iter((self.mesh, self.metric, self.embedding))


def _cumtrapz(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    return out


def _exact_embedding(mesh: TriSphere, positions: np.ndarray) -> tuple[MetricField, EmbeddingState]:
    g = induced_metric(mesh, positions)
    emb = EmbeddingState(
        positions=positions, metric_ref=g.metric_hash(),
        residual=0.0, converged=True,
    )
    return g, emb


def gen_round(level: int, radius: float = 1.0) -> GeneratedSurface:
    """Icosphere vertices projected to the radius-R sphere."""
    if radius <= 0:
        raise InputError(f"radius must be positive, got {radius}")
    mesh = icosphere(level)
    positions = radius * icosphere_positions(level)
    g, emb = _exact_embedding(mesh, positions)
    return GeneratedSurface(mesh=mesh, metric=g, embedding=emb)


def gen_spheroid(level: int, a: float, c: float) -> GeneratedSurface:
    """Unit icosphere stretched to (a x, a y, c z)."""
    if a <= 0 or c <= 0:
        raise InputError(f"spheroid semi-axes must be positive, got a={a}, c={c}")
    mesh = icosphere(level)
    positions = icosphere_positions(level) * np.array([a, a, c])
    g, emb = _exact_embedding(mesh, positions)
    return GeneratedSurface(mesh=mesh, metric=g, embedding=emb)


def _profile_from_density(u_of_sbar, flatness: dict,
                          length: float = np.pi,
                          samples: int = PROFILE_SAMPLES) -> RevolutionProfile:
    """Build a closed convex profile whose turning-angle density is
    proportional to u(s/L) * exp(a s/L), with the tilt a solved so the
    generatrix returns to the axis (r(L) = 0)."""
    s = np.linspace(0.0, length, samples)
    sbar = s / length
    u0 = u_of_sbar(sbar)
    if np.any(u0 < 0):
        raise MetricError("turning-angle density must be nonnegative")

    def closure_gap(a: float) -> float:
        u = u0 * np.exp(a * sbar)
        psi = (np.pi / np.trapezoid(u, s)) * _cumtrapz(u, s)
        return float(np.trapezoid(np.cos(psi), s))

    gap0 = closure_gap(0.0)
    if abs(gap0) < 1e-12 * length:
        a_star = 0.0
    else:
        grid = np.linspace(-60.0, 60.0, 241)
        gaps = np.array([closure_gap(a) for a in grid])
        sign_change = np.nonzero(gaps[:-1] * gaps[1:] <= 0)[0]
        if sign_change.size == 0:
            raise MetricError("profile cannot be closed: no tilt balances the generatrix")
        k = sign_change[np.argmin(np.abs(grid[sign_change]))]
        a_star = brentq(closure_gap, grid[k], grid[k + 1], xtol=1e-13)

    u = u0 * np.exp(a_star * sbar)
    scale = np.pi / np.trapezoid(u, s)
    psi = scale * _cumtrapz(u, s)
    psi_prime = scale * u
    r = _cumtrapz(np.cos(psi), s)
    z = _cumtrapz(np.sin(psi), s)
    r[-1] = max(r[-1], 0.0)

    # K = psi' sin(psi)/r, with the pole limit sin(psi)/r -> psi'(pole).
    K = np.empty_like(s)
    K[1:-1] = psi_prime[1:-1] * np.sin(psi[1:-1]) / r[1:-1]
    K[0] = psi_prime[0] ** 2
    K[-1] = psi_prime[-1] ** 2
    return RevolutionProfile(s=s, r=r, z=z, psi=psi, K_profile=K, flatness=flatness)


def make_profile(kind: str = "none", order: int = 2,
                 t0: float = np.pi / 2) -> RevolutionProfile:
    """Profiles: 'none' (round), 'flat_pole' (K vanishing like s^(4m-4) at the
    north pole, matching a z ~ r^(2m) cap), 'flat_circle' (K vanishing to
    second order on the latitude with parameter t0 in (0, pi))."""
    if kind == "none":
        return _profile_from_density(lambda sb: np.ones_like(sb), {"kind": "none"})
    if kind == "flat_pole":
        if order < 2:
            raise InputError(f"flat_pole order must be >= 2, got {order}")
        p = 2 * order - 2
        return _profile_from_density(
            lambda sb: sb**p, {"kind": "flat_pole", "order": order}
        )
    if kind == "flat_circle":
        if not (0.0 < t0 < np.pi):
            raise InputError(f"flat_circle t0 must lie in (0, pi), got {t0}")
        sb0 = t0 / np.pi
        return _profile_from_density(
            lambda sb: (sb - sb0) ** 2 + CIRCLE_DENSITY_FLOOR,
            {"kind": "flat_circle", "t0": t0},
        )
    raise InputError(f"unknown flatness kind {kind!r}")


def gen_flat_spot(level: int, kind: str = "flat_pole", order: int = 2,
                  t0: float = np.pi / 2) -> GeneratedSurface:
    """Convex surface of revolution with prescribed curvature vanishing,
    sampled onto the icosphere by area-equalized latitude mapping."""
    profile = make_profile(kind=kind, order=order, t0=t0)
    mesh = icosphere(level)
    unit = icosphere_positions(level)
    theta = np.arccos(np.clip(unit[:, 2], -1.0, 1.0))
    phi = np.arctan2(unit[:, 1], unit[:, 0])
    positions = profile.map_polar(theta, phi)
    g, emb = _exact_embedding(mesh, positions)

    intr = angle_defect_curvature(g)
    sup_K = float(intr.K.max())
    min_K = float(intr.K.min())
    if min_K < -NEG_K_CERTIFICATE * sup_K:
        raise MetricError(
            f"generated metric dips to K={min_K:.3e} (sup {sup_K:.3e}); "
            "sampling produced a nonconvex discretization"
        )
    zero_set = np.nonzero(intr.K < ZERO_SET_FRACTION * sup_K)[0]
    return GeneratedSurface(mesh=mesh, metric=g, embedding=emb,
                            profile=profile, zero_set=zero_set)
