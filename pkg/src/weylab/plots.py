"""Render sweep diagnostics as matplotlib figures next to the delimited
series they are drawn from. Output is deterministic: fixed SVG hash salt,
no embedded dates, and series sorted before writing."""

from __future__ import annotations

import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import InputError  # noqa: E402
from .io import atomic_write_text, eps_dirname, load_report, read_json  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "weylab"
_SAVE_KW = {"metadata": {"Date": None}, "format": "svg"}


def _write_series_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(x)) if isinstance(x, float) else str(x)
                              for x in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _line_figure(path: Path, eps: list[float], values: list[float],
                 ylabel: str, logy: bool = False) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(eps, values, "o-", color="tab:blue")
    ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.invert_xaxis()  # continuation runs toward epsilon -> 0
    ax.set_xlabel("epsilon")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def emit_plots(sweep_dir: Path) -> list[Path]:
    """Write the diagnostic figures and their CSVs under <sweep_dir>/plots.

    Series: (eps, max H), (eps, max H*k), (kappa1, kappa2) scatter with the
    C0 * kappa1^(-1/3) reference curve, (eps, inf Harnack ratio), and
    (eps, total mean curvature). Missing series are skipped with a warning.
    """
    sweep_dir = Path(sweep_dir)
    verdict_path = sweep_dir / "verdict.json"
    if not verdict_path.exists():
        raise InputError(f"no verdict.json in {sweep_dir}")
    verdict = read_json(verdict_path)
    out = sweep_dir / "plots"
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    epsilons = [float(e) for e in verdict.get("epsilons", [])]
    if not epsilons:
        warnings.warn("verdict lists no epsilons; nothing to plot")
        return written

    reports = {}
    for eps in epsilons:
        rp = sweep_dir / eps_dirname(eps) / "report.csv"
        if rp.exists():
            reports[eps] = load_report(rp)
        else:
            warnings.warn(f"missing report for epsilon={eps:g}; skipped")

    # (eps, max H) and (eps, max H*k)
    if reports:
        eps_list = sorted(reports, reverse=True)
        max_h = [float(reports[e].H.max()) for e in eps_list]
        max_hk = [float((reports[e].H * reports[e].k).max()) for e in eps_list]
        _write_series_csv(out / "max_H.csv", ["epsilon", "max_H"],
                          [[e, h] for e, h in zip(eps_list, max_h)])
        _line_figure(out / "max_H.svg", eps_list, max_h, "max H")
        _write_series_csv(out / "max_Hk.csv", ["epsilon", "max_Hk"],
                          [[e, h] for e, h in zip(eps_list, max_hk)])
        _line_figure(out / "max_Hk.svg", eps_list, max_hk, "max H*k")
        written += [out / "max_H.svg", out / "max_Hk.svg"]

        # principal-curvature scatter with the rate reference curve
        rows = []
        for e in eps_list:
            r = reports[e]
            for v in range(len(r.kappa1)):
                rows.append([e, float(r.kappa1[v]), float(r.kappa2[v])])
        _write_series_csv(out / "rate_scatter.csv",
                          ["epsilon", "kappa1", "kappa2"], rows)
        fig, ax = plt.subplots(figsize=(5.0, 4.0))
        cmap = plt.get_cmap("viridis")
        for i, e in enumerate(eps_list):
            r = reports[e]
            ax.scatter(r.kappa1, r.kappa2, s=4,
                       color=cmap(i / max(len(eps_list) - 1, 1)),
                       label=f"eps={e:g}", alpha=0.6, linewidths=0)
        rate_entries = verdict.get("rate", [])
        if rate_entries:
            C0 = max(en["C0_bound"] for en in rate_entries)
            k1_all = np.concatenate([reports[e].kappa1 for e in eps_list])
            lo = max(float(k1_all[k1_all > 0].min()) if (k1_all > 0).any() else 1e-3,
                     1e-6)
            hi = float(k1_all.max()) if k1_all.max() > lo else lo * 10
            ref = np.geomspace(lo, hi, 200)
            ax.plot(ref, C0 / np.cbrt(ref), "k--", lw=1,
                    label="C0 * kappa1^(-1/3)")
        ax.set_xlabel("kappa1")
        ax.set_ylabel("kappa2")
        ax.legend(fontsize=7)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(out / "rate_scatter.svg", **_SAVE_KW)
        plt.close(fig)
        written.append(out / "rate_scatter.svg")

    # (eps, inf Harnack ratio)
    harnack = [h for h in verdict.get("harnack", [])
               if h.get("inf_ratio") is not None]
    if harnack:
        eps_h = [float(h["epsilon"]) for h in harnack]
        ratios = [float(h["inf_ratio"]) for h in harnack]
        _write_series_csv(out / "harnack_ratio.csv",
                          ["epsilon", "inf_ratio"],
                          [[e, r] for e, r in zip(eps_h, ratios)])
        _line_figure(out / "harnack_ratio.svg", eps_h, ratios,
                     "inf patch min W / max W")
        written.append(out / "harnack_ratio.svg")
    else:
        warnings.warn("Harnack region empty at every epsilon; ratio plot skipped")

    # (eps, total mean curvature)
    total = verdict.get("total_curvature", {}).get("trace", [])
    if total:
        eps_t = epsilons[: len(total)]
        _write_series_csv(out / "total_H.csv",
                          ["epsilon", "total_mean_curvature"],
                          [[e, t] for e, t in zip(eps_t, total)])
        _line_figure(out / "total_H.svg", eps_t, [float(t) for t in total],
                     "integral of H dA")
        written.append(out / "total_H.svg")
    else:
        warnings.warn("no total-curvature trace in verdict; plot skipped")
    return written
