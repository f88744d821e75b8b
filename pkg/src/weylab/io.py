"""Persistence: canonical JSON with content hashes, full-precision CSV
reports, atomic writes, and run manifests for reproducibility checks.

All numeric output uses shortest round-trip float repr, so reading a file
back and re-verifying reproduces verdicts bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .embed import EmbeddingState
from .errors import InputError, SchemaError
from .extrinsic import CurvatureReport
from .mesh import TriSphere
from .metric import MetricField, RegularizationStep

REPORT_COLUMNS = [
    "vertex_id", "epsilon", "K_intr", "kappa1", "kappa2", "H", "k_sq", "W",
    "gauss_residual", "area_weight", "clamped",
]


def _plain(obj):
    """Recursively convert numpy scalars/arrays for JSON serialization."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def write_json(path: Path, doc) -> str:
    text = canonical_json(doc)
    atomic_write_text(path, text + "\n")
    return sha256_text(text + "\n")


def read_json(path: Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc


# ---------------------------------------------------------------------------
# Topology / metric / embedding documents

def save_topology(path: Path, mesh: TriSphere) -> str:
    return write_json(path, mesh.to_json_dict())


def load_topology(path: Path) -> TriSphere:
    doc = read_json(path)
    if "faces" not in doc:
        raise SchemaError(f"{path}: not a topology document (no 'faces')")
    return TriSphere.from_json_dict(doc)


def metric_doc(g: MetricField, reg: RegularizationStep | None = None) -> dict:
    doc = {
        "topology_ref": g.mesh.topology_hash(),
        "edge_lengths": g.lengths.tolist(),
    }
    if reg is not None:
        doc["epsilon"] = reg.epsilon
        doc["lambda"] = reg.lam.tolist()
        doc["min_K"] = reg.min_K
        doc["amplitude_doublings"] = reg.amplitude_doublings
        doc["tau_deg"] = reg.tau_deg
        doc["K0"] = reg.K0
    return doc


def save_metric(path: Path, g: MetricField,
                reg: RegularizationStep | None = None) -> str:
    return write_json(path, metric_doc(g, reg))


def load_metric(path: Path, mesh: TriSphere) -> MetricField:
    doc = read_json(path)
    if "edge_lengths" not in doc:
        raise SchemaError(f"{path}: not a metric document (no 'edge_lengths')")
    if doc.get("topology_ref") != mesh.topology_hash():
        raise SchemaError(f"{path}: topology_ref does not match the given mesh")
    lengths = np.asarray(doc["edge_lengths"], dtype=np.float64)
    return MetricField(mesh, lengths)


def embedding_doc(emb: EmbeddingState) -> dict:
    return {
        "metric_ref": emb.metric_ref,
        "positions": emb.positions.tolist(),
        "residual": emb.residual,
        "converged": emb.converged,
        "iterations": emb.iterations,
    }


def save_embedding(path: Path, emb: EmbeddingState) -> str:
    return write_json(path, embedding_doc(emb))


def load_embedding(path: Path) -> EmbeddingState:
    doc = read_json(path)
    for key in ("metric_ref", "positions", "residual", "converged"):
        if key not in doc:
            raise SchemaError(f"{path}: embedding document missing {key!r}")
    return EmbeddingState(
        positions=np.asarray(doc["positions"], dtype=np.float64),
        metric_ref=doc["metric_ref"],
        residual=float(doc["residual"]),
        converged=bool(doc["converged"]),
        iterations=int(doc.get("iterations", 0)),
    )


# ---------------------------------------------------------------------------
# Report CSV

def save_report(path: Path, report: CurvatureReport) -> str:
    eps = report.epsilon if report.epsilon is not None else float("nan")
    lines = [",".join(REPORT_COLUMNS)]
    n = len(report.K_intr)
    for v in range(n):
        row = [
            str(v), repr(float(eps)), repr(float(report.K_intr[v])),
            repr(float(report.kappa1[v])), repr(float(report.kappa2[v])),
            repr(float(report.H[v])), repr(float(report.k_sq[v])),
            repr(float(report.W[v])), repr(float(report.gauss_residual[v])),
            repr(float(report.area_weight[v])),
            "1" if report.clamped[v] else "0",
        ]
        lines.append(",".join(row))
    lines.append(f"# fit_ring={report.fit_ring} mean_edge={report.mean_edge!r}")
    text = "\n".join(lines) + "\n"
    atomic_write_text(path, text)
    return sha256_text(text)


def load_report(path: Path) -> CurvatureReport:
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing file: {path}")
    lines = path.read_text().strip().split("\n")
    if not lines or lines[0].split(",") != REPORT_COLUMNS:
        raise SchemaError(f"{path}: unexpected report header")
    meta = {}
    rows = []
    for line in lines[1:]:
        if line.startswith("#"):
            for tok in line[1:].split():
                key, _, val = tok.partition("=")
                meta[key] = val
            continue
        rows.append(line.split(","))
    if not rows:
        raise SchemaError(f"{path}: empty report")
    data = np.array([[float(x) for x in row[1:10]] for row in rows])
    clamped = np.array([row[10] == "1" for row in rows])
    eps = data[0, 0]
    return CurvatureReport(
        K_intr=data[:, 1], kappa1=data[:, 2], kappa2=data[:, 3], H=data[:, 4],
        k_sq=data[:, 5], W=data[:, 6], gauss_residual=data[:, 7],
        area_weight=data[:, 8], clamped=clamped,
        mean_edge=float(meta.get("mean_edge", "nan")),
        fit_ring=int(meta.get("fit_ring", "2")),
        epsilon=None if np.isnan(eps) else float(eps),
    )


# ---------------------------------------------------------------------------
# Run manifest

@dataclass
class RunManifest:
    command: list[str]
    config: dict
    tool_version: str = __version__
    created: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "created": self.created,
            "command": self.command,
            "config": _plain(self.config),
            "inputs": self.inputs,
            "outputs": self.outputs,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RunManifest":
        m = cls(command=list(doc.get("command", [])), config=doc.get("config", {}))
        m.tool_version = doc.get("tool_version", "?")
        m.created = doc.get("created", "?")
        m.inputs = dict(doc.get("inputs", {}))
        m.outputs = dict(doc.get("outputs", {}))
        return m


def save_manifest(path: Path, manifest: RunManifest) -> None:
    atomic_write_text(path, json.dumps(manifest.to_doc(), indent=2, sort_keys=True) + "\n")


def load_manifest(path: Path) -> RunManifest:
    return RunManifest.from_doc(read_json(path))


def check_output_hashes(sweep_dir: Path, manifest: RunManifest) -> None:
    """Raise SchemaError if any manifest-listed output was altered."""
    sweep_dir = Path(sweep_dir)
    for rel, expected in sorted(manifest.outputs.items()):
        target = sweep_dir / rel
        if not target.exists():
            raise SchemaError(f"manifest output missing: {rel}")
        actual = file_hash(target)
        if actual != expected:
            raise SchemaError(
                f"hash mismatch for {rel}: manifest {expected[:12]}.., "
                f"file {actual[:12]}.."
            )


def eps_dirname(epsilon: float) -> str:
    return f"eps_{epsilon:g}"
