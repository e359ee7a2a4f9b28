"""Report artifacts: CSV tables, JSON-lines audits and optional PNG figures.

Every artifact carries the run configuration and a build identifier: CSV
files as leading ``#`` comment lines, JSON-lines files as a first
``{"meta": ...}`` object, PNG files in their text metadata.
"""

from __future__ import annotations

import csv
import json
import math
import os
import subprocess
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__

# Column dictionary for simulation diagnostics.
DIAGNOSTIC_COLUMNS = {
    "t": "time",
    "energy": "energy of psi = 1 + u",
    "v_L2": "||v||_2",
    "v_L6": "||v||_6",
    "v_Linf": "||v||_inf",
    "Uinv_v_L6": "||U^-1 v||_6",
    "u_L2": "||u||_2",
    "sob_L2": "||<grad> v||_2",
    "sob_L6": "||<grad> v||_6",
    "ang_L2": "sum over planes of ||Omega v||_2",
    "ang_L6": "sum over planes of ||Omega v||_6",
    "weighted_L2": "||J(t) v||_2",
    "x_total": "X-norm total",
    "u2_mean": "mean of Im u (the mode U removes)",
    "u1_mean": "mean of Re u",
    "zero_mode_discarded": "zero-mode amplitude dropped by U",
    "boundary_contamination": "mass fraction within L/8 of the box edge",
    "boundary_phase": "phase of psi on the boundary shell",
}


@lru_cache(maxsize=1)
def build_id():
    """git-describe style identifier, or the package version outside a checkout."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here,
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        )
        tag = out.stdout.strip()
        if tag:
            return f"cqnls-{__version__}-{tag}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"cqnls-{__version__}"


def _clean(value):
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def meta(config):
    return {"build": build_id(), "config": _clean(config)}


def write_csv(path, rows, config, columns=None):
    rows = list(rows)
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# build: {build_id()}\n")
        fh.write(f"# config: {json.dumps(_clean(config), sort_keys=True)}\n")
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k, "")) for k in columns})
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    if isinstance(v, (dict, list, tuple)):
        return json.dumps(_clean(v), sort_keys=True)
    return v


def read_csv(path):
    """Rows of a CSV written by :func:`write_csv` (comment lines skipped)."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_jsonl(path, rows, config):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(json.dumps({"meta": meta(config)}, sort_keys=True) + "\n")
        for r in rows:
            fh.write(json.dumps(_clean(r), sort_keys=True) + "\n")
    return path


def write_json(path, obj, config):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"meta": meta(config), **_clean(obj)}
    with open(path, "w") as fh:
        json.dump(body, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return path


# --- figures -----------------------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path, config):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    md = {"Software": None, "Description": json.dumps(meta(config), sort_keys=True)}
    fig.savefig(path, dpi=110, metadata=md)
    _pyplot().close(fig)
    return path


def plot_diagnostics(path, trajectories, config, keys=("energy", "v_L2", "v_Linf", "x_total")):
    """One panel per diagnostic, one line per solver."""
    plt = _pyplot()
    fig, axes = plt.subplots(len(keys), 1, figsize=(6.5, 2.2 * len(keys)), sharex=True)
    axes = np.atleast_1d(axes)
    for ax, key in zip(axes, keys):
        for name, traj in trajectories.items():
            ax.plot(traj.times, traj.series(key), label=name)
        ax.set_ylabel(key)
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=8)
    axes[-1].set_xlabel("t")
    fig.tight_layout()
    return _save(fig, path, config)


def plot_decay(path, reports, config):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    for rep in reports:
        ax.loglog(rep.times, rep.sup, "o-", ms=3, label=f"sup |u|, N={rep.N:g}")
        ax.loglog(rep.times, rep.envelope * np.median(rep.ratio), "--", lw=1, label=f"envelope x median ratio, N={rep.N:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("sup over x")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path, config)


def plot_atlas(path, rows, config):
    """Claimed-bound ratios per dyad pair, one marker series per (region, multiplier)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4.2))
    series = {}
    for i, row in enumerate(rows):
        for name, val in (row.get("ratios") or {}).items():
            series.setdefault((row["region"], name), []).append((i, val))
    for (region, name), pts in sorted(series.items()):
        xs, ys = zip(*pts)
        ax.semilogy(xs, ys, "o", ms=4, label=f"region {region} {name}")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels([f"({r['N1']:g},{r['N2']:g})" for r in rows], rotation=90, fontsize=6)
    ax.set_ylabel("op estimate / claimed bound")
    ax.grid(alpha=0.3)
    if series:
        ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    return _save(fig, path, config)


def output_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def relpaths(paths, base):
    return [os.path.relpath(p, base) for p in paths]
