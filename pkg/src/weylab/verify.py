"""Empirical checks of the quantitative curvature estimates on sweep output:
the bounded-H / bounded-product dichotomy, the cube-root blowup-rate bound,
the inverse-mean-curvature Harnack ratio on patches, the uniform-H
classification of a family, and total-mean-curvature stability."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embed import SweepResult
from .errors import InputError, MetricError
from .extrinsic import CurvatureReport, total_mean_curvature
from .mesh import PatchCover
from .metric import IntrinsicCurvature

INEQ_TOL = 0.05          # discretization tolerance on all inequality checks
UNIFORM_H_SPREAD = 0.10  # max relative spread of max H for UniformH
DIVERGENCE_FACTOR = 2.0  # overall growth declaring ProductDiverges
TOTAL_CURV_RATIO = 1.25  # max/min of total mean curvature across epsilon
MIN_PATCH_D0 = 4         # patches with fewer D0 vertices are skipped


@dataclass
class VerifierConfig:
    a0: float | None = None           # mean-curvature split level
    tau_k1: float | None = None       # kappa1 exclusion floor for the rate fit
    patch_hops: int = 2
    delta_override: float | None = None
    b0_override: float | None = None
    ineq_tol: float = INEQ_TOL

    def __post_init__(self):
        if self.a0 is not None and self.a0 <= 0:
            raise InputError("a0 must be positive")
        if self.tau_k1 is not None and self.tau_k1 <= 0:
            raise InputError("tau_k1 must be positive")


@dataclass
class DichotomyVerdict:
    epsilon: float
    branch: str                        # "BoundedH" | "BlowupWithProduct"
    max_H: float
    max_Hk_on_blowup_set: float | None
    b0_used: float
    a0_used: float
    violations: list = field(default_factory=list)  # (vertex, H, k, H*k)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class RateVerdict:
    epsilon: float
    C0_fit: float | None
    C0_bound: float
    a0_term: float
    included_count: int
    excluded_count: int
    tol: float

    @property
    def vacuous(self) -> bool:
        return self.included_count == 0

    @property
    def ok(self) -> bool:
        if self.vacuous:
            return True
        return self.C0_fit <= max(self.C0_bound, self.a0_term) * (1.0 + self.tol)


@dataclass
class HarnackReport:
    epsilon: float
    delta_used: float
    d0_vertices: np.ndarray
    patch_ratios: np.ndarray
    inf_ratio: float | None
    d0_empty: bool
    skipped_patches: int
    certificate_violations: list = field(default_factory=list)


def default_b0(intr: IntrinsicCurvature) -> float:
    """Product bound 9 * (sup k)^4 = 9 * (sup K)^2 from intrinsic data."""
    sup_K = float(np.maximum(intr.K, 0.0).max())
    if sup_K <= 0:
        raise MetricError("sup of intrinsic curvature is nonpositive")
    return 9.0 * sup_K**2


def default_delta(intr: IntrinsicCurvature) -> float:
    """Harnack-region threshold 1 / (8 * (sup k)^4)."""
    sup_K = float(np.maximum(intr.K, 0.0).max())
    if sup_K <= 0:
        raise MetricError("sup of relative curvature is nonpositive")
    return 1.0 / (8.0 * sup_K**2)


def default_a0(intr: IntrinsicCurvature) -> float:
    """Desk-scale split level 4 * (1 + sup k); the analytic constant needs
    machinery outside this artifact, and the product bound on the blowup
    set is insensitive to the split."""
    sup_k = float(np.sqrt(np.maximum(intr.K, 0.0).max()))
    return 4.0 * (1.0 + sup_k)


def certify_delta(report: CurvatureReport, delta: float) -> list:
    """Direct evaluation of 1 - 4 k^2 W^2 > 1/2 on {W < delta k}; returns
    violating (vertex, value) pairs."""
    k = report.k
    W = report.W
    mask = report.W_defined & (W < delta * k)
    vals = 1.0 - 4.0 * report.k_sq[mask] * W[mask] ** 2
    bad = vals <= 0.5
    verts = np.nonzero(mask)[0][bad]
    return [(int(v), float(x)) for v, x in zip(verts, vals[bad])]


def dichotomy_check(report: CurvatureReport, intr: IntrinsicCurvature,
                    cfg: VerifierConfig | None = None) -> DichotomyVerdict:
    """Either max H <= a0, or every vertex with H > a0 keeps H*k <= b0
    within the discretization tolerance."""
    cfg = cfg or VerifierConfig()
    a0 = cfg.a0 if cfg.a0 is not None else default_a0(intr)
    b0 = cfg.b0_override if cfg.b0_override is not None else default_b0(intr)
    max_H = float(report.H.max())
    eps = report.epsilon if report.epsilon is not None else float("nan")
    if max_H <= a0:
        return DichotomyVerdict(eps, "BoundedH", max_H, None, b0, a0)
    blowup = report.H > a0
    assert blowup.any(), "blowup branch with empty blowup set"
    Hk = report.H[blowup] * report.k[blowup]
    max_Hk = float(Hk.max())
    bad = Hk > b0 * (1.0 + cfg.ineq_tol)
    verts = np.nonzero(blowup)[0][bad]
    violations = [
        (int(v), float(report.H[v]), float(report.k[v]),
         float(report.H[v] * report.k[v]))
        for v in verts
    ]
    violations.sort()
    return DichotomyVerdict(eps, "BlowupWithProduct", max_H, max_Hk, b0, a0,
                            violations)


def rate_check(report: CurvatureReport, b0: float,
               cfg: VerifierConfig | None = None) -> RateVerdict:
    """Fit C0 = max kappa2 * cbrt(kappa1) over {kappa1 > tau_k1} and compare
    against the derived bound (4 b0^2)^(1/3), with the strictly-elliptic
    fallback cbrt(4) * a0."""
    cfg = cfg or VerifierConfig()
    if b0 <= 0:
        raise InputError("b0 must be positive")
    tau = cfg.tau_k1 if cfg.tau_k1 is not None else 1e-3 / report.mean_edge
    a0 = cfg.a0 if cfg.a0 is not None else float("nan")
    included = report.kappa1 > tau
    eps = report.epsilon if report.epsilon is not None else float("nan")
    C0_bound = float((4.0 * b0**2) ** (1.0 / 3.0))
    a0_term = float(4.0 ** (1.0 / 3.0) * a0) if np.isfinite(a0) else 0.0
    if not included.any():
        return RateVerdict(eps, None, C0_bound, a0_term, 0,
                           int(len(report.kappa1)), cfg.ineq_tol)
    C0_fit = float((report.kappa2[included]
                    * np.cbrt(report.kappa1[included])).max())
    return RateVerdict(eps, C0_fit, C0_bound, a0_term,
                       int(included.sum()), int((~included).sum()),
                       cfg.ineq_tol)


def harnack_check(report: CurvatureReport, intr: IntrinsicCurvature,
                  patches: PatchCover,
                  cfg: VerifierConfig | None = None) -> HarnackReport:
    """Ratios min W / max W over patches restricted to the near-degenerate
    region D0 = {W < delta * k}. No analytic constant is computable at desk
    scale; the estimate predicts the infimum ratio stays away from zero
    uniformly in epsilon."""
    cfg = cfg or VerifierConfig()
    delta = (cfg.delta_override if cfg.delta_override is not None
             else default_delta(intr))
    eps = report.epsilon if report.epsilon is not None else float("nan")
    k = report.k
    W = report.W
    in_d0 = report.W_defined & (W < delta * k)
    d0 = np.nonzero(in_d0)[0]
    cert = certify_delta(report, delta)
    if d0.size == 0:
        return HarnackReport(eps, delta, d0, np.array([]), None, True, 0, cert)
    ratios = []
    skipped = 0
    for patch in patches.patches:
        sub = patch[in_d0[patch]]
        if sub.size < MIN_PATCH_D0:
            skipped += 1
            continue
        w = W[sub]
        ratios.append(float(w.min() / w.max()))
    ratios = np.array(ratios)
    inf_ratio = float(ratios.min()) if ratios.size else None
    return HarnackReport(eps, delta, d0, ratios, inf_ratio,
                         False, skipped, cert)


def corollary_classify(sweep: SweepResult,
                       cfg: VerifierConfig | None = None) -> tuple[str, dict]:
    """UniformH when max H is stable over the three smallest epsilons;
    otherwise track kappa2 * cbrt(kappa1) at the per-epsilon argmax-H vertex
    and report ProductDiverges on a monotone >= 2x rise, else Neither
    (inconclusive at this resolution, not a refutation)."""
    cfg = cfg or VerifierConfig()
    members = [m for m in sweep.ok_members() if m.report is not None]
    if len(members) < 3:
        raise InputError("corollary classification needs at least 3 epsilons")
    members = sorted(members, key=lambda m: -m.epsilon)
    max_H = np.array([float(m.report.H.max()) for m in members])
    eps = [m.epsilon for m in members]

    smallest = max_H[-3:]
    spread = float((smallest.max() - smallest.min()) / smallest.min())
    trace = {
        "epsilons": eps,
        "max_H": [float(h) for h in max_H],
        "spread_three_smallest": spread,
    }
    if spread <= UNIFORM_H_SPREAD:
        return "UniformH", trace

    prods = []
    for m in members:
        v = int(np.argmax(m.report.H))
        prods.append(float(m.report.kappa2[v] * np.cbrt(max(m.report.kappa1[v], 0.0))))
    trace["product_trace"] = prods
    increasing = all(b > a for a, b in zip(prods, prods[1:]))
    if increasing and prods[-1] >= DIVERGENCE_FACTOR * prods[0]:
        return "ProductDiverges", trace
    return "Neither", trace


def total_curvature_check(sweep: SweepResult) -> tuple[bool, list, str | None]:
    """Uniform-boundedness proxy: max/min of the total mean curvature over
    the sweep must stay <= 1.25. Fails with a tag on unconverged members."""
    trace = []
    for m in sweep.members:
        if m.error is not None or m.embedding is None or not m.embedding.converged:
            return False, trace, f"unconverged member at epsilon={m.epsilon}"
        if m.report is None:
            return False, trace, f"missing report at epsilon={m.epsilon}"
        trace.append(float(total_mean_curvature(m.report)))
    values = np.array(trace)
    ok = bool(values.max() <= TOTAL_CURV_RATIO * values.min())
    return ok, trace, None


def _dichotomy_json(v: DichotomyVerdict) -> dict:
    return {
        "epsilon": v.epsilon,
        "branch": v.branch,
        "max_H": v.max_H,
        "max_Hk_on_blowup_set": v.max_Hk_on_blowup_set,
        "b0_used": v.b0_used,
        "a0_used": v.a0_used,
        "violations": [list(t) for t in v.violations],
        "ok": v.ok,
    }


def sweep_verdict(sweep: SweepResult, patches: PatchCover,
                  cfg: VerifierConfig | None = None) -> dict:
    """All checks over a sweep with resolved defaults, as a JSON-ready dict.

    a0 and tau_k1 are resolved once from the base metric (the split level is
    an epsilon-independent constant); b0 and delta are re-derived per epsilon
    from the regularized metric's intrinsic curvature unless overridden, and
    the dichotomy is additionally scanned at 2x and 4x the split level.
    """
    from .metric import angle_defect_curvature  # local: avoids cycle at import

    cfg = cfg or VerifierConfig()
    base_intr = angle_defect_curvature(sweep.base_metric)
    a0 = cfg.a0 if cfg.a0 is not None else default_a0(base_intr)
    tau_k1 = (cfg.tau_k1 if cfg.tau_k1 is not None
              else 1e-3 / sweep.base_metric.mean_edge())
    resolved = VerifierConfig(a0=a0, tau_k1=tau_k1, patch_hops=cfg.patch_hops,
                              delta_override=cfg.delta_override,
                              b0_override=cfg.b0_override,
                              ineq_tol=cfg.ineq_tol)

    dich, rate, harnack = [], [], []
    members = [m for m in sweep.ok_members() if m.report is not None]
    for m in members:
        intr = m.intr if m.intr is not None else angle_defect_curvature(m.reg.metric)
        b0 = (resolved.b0_override if resolved.b0_override is not None
              else default_b0(intr))
        d = dichotomy_check(m.report, intr, resolved)
        entry = _dichotomy_json(d)
        scan = []
        for mult in (2.0, 4.0):
            scan_cfg = VerifierConfig(a0=mult * a0, tau_k1=tau_k1,
                                      b0_override=resolved.b0_override,
                                      ineq_tol=resolved.ineq_tol)
            dv = dichotomy_check(m.report, intr, scan_cfg)
            scan.append({"a": mult * a0, "branch": dv.branch, "ok": dv.ok,
                         "max_Hk_on_blowup_set": dv.max_Hk_on_blowup_set})
        entry["a_scan"] = scan
        dich.append(entry)

        r = rate_check(m.report, b0, resolved)
        rate.append({
            "epsilon": r.epsilon, "C0_fit": r.C0_fit, "C0_bound": r.C0_bound,
            "a0_term": r.a0_term, "included_count": r.included_count,
            "excluded_count": r.excluded_count, "vacuous": r.vacuous,
            "ok": r.ok,
        })

        h = harnack_check(m.report, intr, patches, resolved)
        harnack.append({
            "epsilon": h.epsilon, "delta_used": h.delta_used,
            "d0_size": int(h.d0_vertices.size), "d0_empty": h.d0_empty,
            "inf_ratio": h.inf_ratio, "n_patches": int(h.patch_ratios.size),
            "skipped_patches": h.skipped_patches,
            "certificate_violations": [list(t) for t in h.certificate_violations],
        })

    if len(members) >= 3:
        corollary, corollary_trace = corollary_classify(sweep, resolved)
    else:
        corollary, corollary_trace = "Insufficient", {"reason": "< 3 epsilons"}
    total_ok, total_trace, total_tag = total_curvature_check(sweep)

    nonempty = [h for h in harnack if not h["d0_empty"] and h["inf_ratio"] is not None]
    if nonempty:
        harnack_ok = all(h["inf_ratio"] > 0 for h in nonempty)
        if len(nonempty) >= 2:
            harnack_ok = harnack_ok and (
                nonempty[-1]["inf_ratio"] >= 0.5 * nonempty[0]["inf_ratio"]
            )
        harnack_stability = {
            "largest_eps_ratio": nonempty[0]["inf_ratio"],
            "smallest_eps_ratio": nonempty[-1]["inf_ratio"],
        }
    else:
        harnack_ok = True
        harnack_stability = {"vacuous": True}

    all_pass = (
        all(d["ok"] for d in dich)
        and all(r["ok"] for r in rate)
        and harnack_ok
        and total_ok
    )
    return {
        "epsilons": [m.epsilon for m in members],
        "dichotomy": dich,
        "rate": rate,
        "harnack": harnack,
        "harnack_stability": harnack_stability,
        "corollary": corollary,
        "corollary_trace": corollary_trace,
        "total_curvature": {"pass": total_ok, "trace": total_trace,
                            "tag": total_tag, "max_over_min_bound": TOTAL_CURV_RATIO},
        "tolerances": {
            "ineq_tol": resolved.ineq_tol,
            "a0": a0,
            "tau_k1": tau_k1,
            "patch_hops": resolved.patch_hops,
            "delta_override": resolved.delta_override,
            "b0_override": resolved.b0_override,
        },
        "all_pass": bool(all_pass),
    }
