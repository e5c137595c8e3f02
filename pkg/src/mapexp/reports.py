"""Delimited, JSON, and vector-graphic outputs with embedded run manifests.

Every artifact embeds the manifest of the run that produced it (command,
model hash, configuration, seed, tool version), and every writer is
deterministic: reruns with an equal manifest produce identical bytes.
Timestamps are therefore omitted throughout, and the SVG backend runs
with a fixed hash salt and no creation date.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "mapexp"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from ._version import __version__
from .engine import ExpIntegralTrace, MapPath, MARK_NAMES
from .model import MapSpec
from .modelio import dumps_model

__all__ = [
    "RunManifest",
    "spec_hash",
    "dumps_canonical",
    "write_json_report",
    "write_path_csv",
    "write_values_csv",
    "render_trajectories",
    "render_ladder_traces",
]


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "as_json"):
        return obj.as_json()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def dumps_canonical(obj) -> str:
    """Stable JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def spec_hash(spec: MapSpec) -> str:
    return hashlib.sha256(dumps_model(spec).encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    """Provenance block carried by every output artifact."""

    command: str
    seed: int = 0
    spec_sha256: str = ""
    config: dict = field(default_factory=dict)
    version: str = __version__
    extra: dict = field(default_factory=dict)

    @classmethod
    def for_run(cls, command: str, spec: MapSpec | None = None,
                config: dict | None = None, seed: int = 0,
                **extra) -> "RunManifest":
        return cls(command=command, seed=seed,
                   spec_sha256=spec_hash(spec) if spec is not None else "",
                   config=dict(config or {}), extra=dict(extra))

    def as_json(self) -> dict:
        return {"command": self.command, "seed": self.seed,
                "spec_sha256": self.spec_sha256, "config": self.config,
                "version": self.version, "extra": self.extra}

    def compact(self) -> str:
        return json.dumps(self.as_json(), sort_keys=True,
                          separators=(",", ":"), default=_json_default)


# ---------------------------------------------------------------------------
# JSON and delimited writers
# ---------------------------------------------------------------------------


def write_json_report(payload, manifest: RunManifest, path: str | Path) -> None:
    doc = {"manifest": manifest.as_json(), "report": payload}
    Path(path).write_text(dumps_canonical(doc), encoding="utf-8")


def _fmt(x: float) -> str:
    # repr of float is the shortest round-trip decimal
    return repr(float(x))


def write_path_csv(path_obj: MapPath, trace: ExpIntegralTrace,
                   manifest: RunManifest, path: str | Path) -> None:
    """One row per grid point: t, state, xi, eta, e, mark."""
    states = path_obj.state_at_points()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# manifest: {manifest.compact()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "state", "xi", "eta", "e", "mark"])
        for m in range(path_obj.t.size):
            w.writerow([_fmt(path_obj.t[m]), int(states[m]),
                        _fmt(path_obj.xi[m]), _fmt(path_obj.eta[m]),
                        _fmt(trace.values[m]), MARK_NAMES[int(path_obj.mark[m])]])


def write_values_csv(columns: dict[str, np.ndarray], manifest: RunManifest,
                     path: str | Path) -> None:
    """Aligned value columns (terminal samples, ladder tables, ...)."""
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    n = max((a.size for a in arrays), default=0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# manifest: {manifest.compact()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(n):
            w.writerow([_fmt(a[i]) if i < a.size else "" for a in arrays])


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------


def _save_svg(fig, manifest: RunManifest, path: str | Path) -> None:
    fig.savefig(path, format="svg",
                metadata={"Date": None, "Description": manifest.compact()})
    plt.close(fig)


def render_trajectories(bundle: list[tuple[MapPath, ExpIntegralTrace]],
                        manifest: RunManifest, path: str | Path,
                        title: str = "") -> None:
    """Fan of E(t) trajectories over the xi fan that drives them."""
    fig, (ax_e, ax_x) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    for k, (p, tr) in enumerate(bundle):
        finite = np.isfinite(tr.values)
        ax_e.plot(p.t[finite], tr.values[finite], drawstyle="steps-post",
                  linewidth=0.9, alpha=0.8, label=f"path {k}")
        ax_x.plot(p.t, p.xi, drawstyle="steps-post", linewidth=0.9, alpha=0.8)
    ax_e.set_ylabel("E(t)")
    ax_x.set_ylabel("xi(t)")
    ax_x.set_xlabel("t")
    if title:
        ax_e.set_title(title)
    if len(bundle) <= 8:
        ax_e.legend(loc="best", fontsize="small")
    fig.tight_layout()
    _save_svg(fig, manifest, path)


def render_ladder_traces(report_json: dict, manifest: RunManifest,
                         path: str | Path, title: str = "") -> None:
    """Cutoff-ladder partial sums per criterion, plus the Cauchy ladder."""
    fig, (ax_l, ax_c) = plt.subplots(1, 2, figsize=(10, 4))
    any_trace = False
    for rec in report_json.get("evidence", []):
        res = rec.get("result")
        if not isinstance(res, dict):
            continue
        trace = res.get("trace") or []
        if not trace:
            continue
        any_trace = True
        us = [pt[0] for pt in trace]
        vals = [pt[1] for pt in trace]
        ax_l.plot(us, vals, marker=".", linewidth=0.9,
                  label=f"{rec['criterion']}@{rec['state']}")
    ax_l.set_xscale("log")
    ax_l.set_xlabel("log-argument cutoff")
    ax_l.set_ylabel("partial tail integral")
    if any_trace:
        ax_l.legend(loc="best", fontsize="x-small")
    else:
        ax_l.text(0.5, 0.5, "no ladder traces", ha="center", va="center",
                  transform=ax_l.transAxes)

    cor = report_json.get("corroboration", {})
    ladder = cor.get("ladder") or []
    cauchy = cor.get("cauchy_sup_median") or []
    if ladder and cauchy:
        pos = [(t, c) for t, c in zip(ladder, cauchy) if c > 0]
        if pos:
            ax_c.loglog([t for t, _ in pos], [c for _, c in pos], marker="o")
        else:
            ax_c.plot(ladder, cauchy, marker="o")
    ax_c.set_xlabel("T")
    ax_c.set_ylabel("median sup |E(t) - E(T)|, t in [T, 2T]")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _save_svg(fig, manifest, path)


def render_histogram(counts, edges, manifest: RunManifest, path: str | Path,
                     title: str = "") -> None:
    """Terminal-value histogram as a filled step plot."""
    fig, ax = plt.subplots(figsize=(7, 4))
    counts = np.asarray(counts, dtype=float)
    edges = np.asarray(edges, dtype=float)
    if counts.size and edges.size == counts.size + 1:
        ax.stairs(counts, edges, fill=True, alpha=0.7)
    else:
        ax.text(0.5, 0.5, "no finite samples", ha="center", va="center",
                transform=ax.transAxes)
    ax.set_xlabel("E(horizon)")
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save_svg(fig, manifest, path)
