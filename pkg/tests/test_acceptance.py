"""Acceptance suite: every quantitative exit criterion at its stated
tolerance, one printed pass line per criterion (run with -s to see them).

Desk scale is icosphere level 4 (2562 vertices) except where a criterion
names level 5. The flat-pole sweep and the spheroid sweep are produced once
per session through the full pipeline (files + manifest + verdict), so the
determinism criterion can re-run from the manifest.
"""

import numpy as np
import pytest

from weylab.cli import main, run_sweep
from weylab.corpus import gen_round, gen_spheroid
from weylab.embed import RoundInit, embed
from weylab.extrinsic import curvature_report, total_mean_curvature
from weylab.io import eps_dirname, load_metric, load_report, load_topology, read_json
from weylab.metric import (
    angle_defect_curvature,
    conformal_equation_residual,
    regularize,
)

FLAT_EPS = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
SPHEROID_EPS = [1e-1, 1e-2, 1e-3]


def announce(num, desc, detail=""):
    print(f"ACCEPTANCE {num:02d} PASS - {desc}" + (f" ({detail})" if detail else ""))


@pytest.fixture(scope="session")
def flat_sweep_dir(tmp_path_factory, flatpole_lvl4):
    out = tmp_path_factory.mktemp("acc") / "flat_sweep"
    src = tmp_path_factory.mktemp("acc_in")
    from weylab.io import save_metric, save_topology

    save_topology(src / "topology.json", flatpole_lvl4.mesh)
    save_metric(src / "metric.json", flatpole_lvl4.metric)
    config = {"eps": FLAT_EPS, "_metric_path": str(src / "metric.json"),
              "_topology_path": str(src / "topology.json")}
    run_sweep(src / "metric.json", src / "topology.json", out, config)
    return out


@pytest.fixture(scope="session")
def spheroid_sweep_dir(tmp_path_factory, spheroid_lvl4):
    out = tmp_path_factory.mktemp("acc") / "spheroid_sweep"
    src = tmp_path_factory.mktemp("acc_in2")
    from weylab.io import save_metric, save_topology

    save_topology(src / "topology.json", spheroid_lvl4.mesh)
    save_metric(src / "metric.json", spheroid_lvl4.metric)
    config = {"eps": SPHEROID_EPS, "_metric_path": str(src / "metric.json"),
              "_topology_path": str(src / "topology.json")}
    run_sweep(src / "metric.json", src / "topology.json", out, config)
    return out


@pytest.fixture(scope="session")
def round_lvl5():
    return gen_round(5, 1.0)


@pytest.fixture(scope="session")
def spheroid_lvl5():
    return gen_spheroid(5, 1.0, 2.0)


@pytest.fixture(scope="session")
def exact_reports(round_lvl3, round_lvl4, round_lvl5, spheroid_lvl3,
                  spheroid_lvl4, spheroid_lvl5):
    surfs = {
        ("round", 3): round_lvl3, ("round", 4): round_lvl4,
        ("round", 5): round_lvl5,
        ("spheroid", 3): spheroid_lvl3, ("spheroid", 4): spheroid_lvl4,
        ("spheroid", 5): spheroid_lvl5,
    }
    return {key: curvature_report(s.embedding, s.metric)
            for key, s in surfs.items()}


def sweep_reports(sweep_dir):
    verdict = read_json(sweep_dir / "verdict.json")
    return verdict, {
        float(eps): load_report(sweep_dir / eps_dirname(eps) / "report.csv")
        for eps in verdict["epsilons"]
    }


def test_criterion_01_gauss_bonnet(round_lvl4, round_lvl5, spheroid_lvl4,
                                   spheroid_lvl5, flatpole_lvl4,
                                   flatcircle_lvl4, flat_sweep_dir,
                                   spheroid_sweep_dir):
    metrics = [s.metric for s in (round_lvl4, round_lvl5, spheroid_lvl4,
                                  spheroid_lvl5, flatpole_lvl4,
                                  flatcircle_lvl4)]
    for sweep_dir in (flat_sweep_dir, spheroid_sweep_dir):
        mesh = load_topology(sweep_dir / "topology.json")
        verdict = read_json(sweep_dir / "verdict.json")
        for eps in verdict["epsilons"]:
            metrics.append(load_metric(
                sweep_dir / eps_dirname(eps) / "metric.json", mesh))
    worst = 0.0
    for g in metrics:
        intr = angle_defect_curvature(g)
        rel = abs(intr.total_defect - 4 * np.pi) / (4 * np.pi)
        worst = max(worst, rel)
        assert rel <= 1e-9
    announce(1, "Gauss-Bonnet 4*pi on all corpus and regularized metrics",
             f"worst rel err {worst:.2e}")


def test_criterion_02_embedder_oracle(round_lvl4, spheroid_lvl4):
    emb = embed(round_lvl4.metric, RoundInit())
    radii = np.linalg.norm(emb.positions, axis=1)
    assert emb.residual < 1e-6
    assert radii.min() >= 1 - 1e-4 and radii.max() <= 1 + 1e-4

    fixed = embed(spheroid_lvl4.metric, spheroid_lvl4.embedding)
    assert fixed.residual < 1e-12
    announce(2, "embedder oracle recovery",
             f"round res {emb.residual:.1e}, radii [{radii.min():.6f}, "
             f"{radii.max():.6f}]; spheroid truth res {fixed.residual:.1e}")


def test_criterion_03_estimator_accuracy(round_lvl5, spheroid_lvl5,
                                         exact_reports):
    rep = exact_reports[("round", 5)]
    err = max(np.abs(rep.kappa1 - 1).max(), np.abs(rep.kappa2 - 1).max())
    assert err < 0.02

    srep = exact_reports[("spheroid", 5)]
    pole_K = srep.kappa1[0] * srep.kappa2[0]
    assert abs(pole_K / 4.0 - 1) < 0.03
    z = spheroid_lvl5.embedding.positions[:, 2]
    eq = int(np.argmin(np.abs(z)))
    assert abs(srep.kappa1[eq] / 0.25 - 1) < 0.03
    assert abs(srep.kappa2[eq] / 1.0 - 1) < 0.03
    announce(3, "curvature estimator accuracy",
             f"sphere lvl5 max err {err:.4f}; spheroid pole K {pole_K:.4f}, "
             f"equator ({srep.kappa1[eq]:.4f}, {srep.kappa2[eq]:.4f})")


def test_criterion_04_gauss_equation_refinement(exact_reports):
    details = []
    for family in ("round", "spheroid"):
        meds = {lvl: float(np.median(exact_reports[(family, lvl)].gauss_residual))
                for lvl in (3, 4, 5)}
        assert meds[3] / meds[4] >= 1.67
        assert meds[4] / meds[5] >= 1.67
        details.append(f"{family} {meds[3]:.4f}/{meds[4]:.4f}/{meds[5]:.4f}")
    announce(4, "Gauss-equation consistency refines with level",
             "; ".join(details))


def test_criterion_05_regularizer_contract(flatpole_lvl4, flat_sweep_dir):
    g = flatpole_lvl4.metric
    sup_K = float(angle_defect_curvature(g).K.max())
    mesh = load_topology(flat_sweep_dir / "topology.json")
    worst_rms, min_lift = 0.0, np.inf
    for eps in FLAT_EPS:
        step = regularize(g, eps)
        assert step.min_K > 0.0
        resid = conformal_equation_residual(g, step)
        rms = float(np.sqrt((resid**2).mean()))
        assert rms < 1e-6 * sup_K
        worst_rms = max(worst_rms, rms)
        min_lift = min(min_lift, step.min_K)
        # stored sweep metric agrees with a fresh regularization
        stored = read_json(flat_sweep_dir / eps_dirname(eps) / "metric.json")
        assert stored["min_K"] == step.min_K
        persisted = load_metric(flat_sweep_dir / eps_dirname(eps) / "metric.json", mesh)
        assert np.array_equal(persisted.lengths, step.metric.lengths)
    announce(5, "regularizer lifts curvature and satisfies its equation",
             f"min lift {min_lift:.2e}, worst residual RMS {worst_rms:.2e} "
             f"(bar {1e-6 * sup_K:.2e})")


def test_criterion_06_dichotomy(flat_sweep_dir):
    verdict, reports = sweep_reports(flat_sweep_dir)
    a0 = verdict["tolerances"]["a0"]
    blowup_bounds = {}
    for entry in verdict["dichotomy"]:
        eps = float(entry["epsilon"])
        rep = reports[eps]
        sup_K = float(np.maximum(rep.K_intr, 0).max())
        blowup = rep.H > a0
        if blowup.any():
            Hk = rep.H[blowup] * rep.k[blowup]
            assert (Hk <= 9 * sup_K**2 * 1.05).all()
            blowup_bounds[eps] = float(Hk.max())
        assert entry["ok"]
    if blowup_bounds:
        smallest = [blowup_bounds[e] for e in sorted(blowup_bounds)[:3]]
        spread = (max(smallest) - min(smallest)) / min(smallest)
        assert spread <= 0.25
        detail = f"blowup-set bound spread {spread:.3f}"
    else:
        detail = (f"bounded branch everywhere: max H "
                  f"{max(d['max_H'] for d in verdict['dichotomy']):.3f} "
                  f"<= a0 {a0:.3f}; product bound vacuously satisfied")
    announce(6, "dichotomy H*k <= 9 (sup K)^2 * 1.05 on blowup sets", detail)


def test_criterion_07_blowup_rate(flat_sweep_dir):
    verdict, _ = sweep_reports(flat_sweep_dir)
    fits = []
    for entry in verdict["rate"]:
        assert entry["ok"]
        assert not entry["vacuous"]
        assert entry["C0_fit"] <= entry["C0_bound"] * 1.05
        fits.append(entry["C0_fit"])
    spread = (max(fits) - min(fits)) / min(fits)
    assert spread <= 0.25
    announce(7, "blowup-rate constant below (4 b0^2)^(1/3) and stable",
             f"C0_fit in [{min(fits):.3f}, {max(fits):.3f}], spread {spread:.3f}")


def test_criterion_08_am_gm(flat_sweep_dir, spheroid_sweep_dir, exact_reports):
    all_reports = list(exact_reports.values())
    for sweep_dir in (flat_sweep_dir, spheroid_sweep_dir):
        _, reports = sweep_reports(sweep_dir)
        all_reports.extend(reports.values())
    margin = np.inf
    for rep in all_reports:
        bar = rep.k - 0.02 * (rep.k + 1.0 / rep.mean_edge)
        margin = min(margin, float((rep.H - bar).min()))
        assert (rep.H >= bar).all()
    announce(8, "AM-GM H >= k within fit tolerance on every embedding",
             f"{len(all_reports)} reports, worst margin {margin:.2e}")


def test_criterion_09_harnack_stability(flat_sweep_dir, spheroid_sweep_dir):
    details = []
    for name, sweep_dir in (("flat", flat_sweep_dir),
                            ("spheroid", spheroid_sweep_dir)):
        verdict, _ = sweep_reports(sweep_dir)
        entries = verdict["harnack"]
        nonempty = [h for h in entries if not h["d0_empty"]]
        if not nonempty:
            details.append(f"{name}: D0 empty at paper delta (vacuous)")
            continue
        ratios = [h["inf_ratio"] for h in nonempty if h["inf_ratio"] is not None]
        assert all(r > 0 for r in ratios)
        if len(ratios) >= 2:
            assert ratios[-1] >= 0.5 * ratios[0]
        details.append(f"{name}: inf ratios {ratios}")
    announce(9, "Harnack patch-ratio stability where D0 is nonempty",
             "; ".join(details))


def test_criterion_10_total_curvature(flat_sweep_dir, exact_reports):
    verdict, _ = sweep_reports(flat_sweep_dir)
    trace = verdict["total_curvature"]["trace"]
    assert verdict["total_curvature"]["pass"]
    ratio = max(trace) / min(trace)
    assert ratio <= 1.25

    sphere_total = total_mean_curvature(exact_reports[("round", 5)])
    assert abs(sphere_total / (4 * np.pi) - 1) < 0.03
    announce(10, "total mean curvature uniform over sweep; sphere equals 4*pi",
             f"sweep max/min {ratio:.4f}; sphere lvl5 {sphere_total:.4f} "
             f"vs {4 * np.pi:.4f}")


def test_criterion_11_strictly_elliptic_control(spheroid_sweep_dir):
    verdict, reports = sweep_reports(spheroid_sweep_dir)
    assert verdict["corollary"] == "UniformH"
    eps_sorted = sorted(reports, reverse=True)[-3:]
    max_h = [float(reports[e].H.max()) for e in eps_sorted]
    spread = (max(max_h) - min(max_h)) / min(max_h)
    assert spread <= 0.10
    announce(11, "strictly elliptic sweep classifies UniformH",
             f"max H {max_h}, spread {spread:.4f}")


def test_criterion_12_determinism(flat_sweep_dir, tmp_path):
    rerun = tmp_path / "rerun"
    rc = main(["sweep", "--from-manifest", str(flat_sweep_dir / "manifest.json"),
               "--out", str(rerun)])
    assert rc == 0
    v1 = read_json(flat_sweep_dir / "verdict.json")
    v2 = read_json(rerun / "verdict.json")
    assert v1 == v2
    assert ((flat_sweep_dir / "verdict.json").read_bytes()
            == (rerun / "verdict.json").read_bytes())
    announce(12, "manifest re-run reproduces every verdict field exactly")
