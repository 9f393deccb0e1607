"""CSV and JSON writers. Every file carries a provenance block (artifact
version, seed, config echo) and is formatted deterministically so reruns
with the same config and seed are byte-identical."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .backward import BackwardSolution
from .paths import PathBundle


def provenance(seed: int, config: dict) -> dict:
    return {"artifact": "jumpbsde", "version": __version__, "seed": int(seed), "config": config}


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_default, allow_nan=True) + "\n"


def write_json(path: Path, payload: dict, seed: int, config: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps({"provenance": provenance(seed, config), **payload}))
    return path


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, header: list[str], rows: Iterable, seed: int, config: dict) -> Path:
    """CSV with two leading ``#`` lines holding the provenance."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# jumpbsde {__version__} seed={int(seed)}\n")
        fh.write("# config=" + json.dumps(config, sort_keys=True, default=_default) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def dump_paths(bundle: PathBundle, out_dir: Path, config: dict) -> tuple[Path, Path]:
    """``paths.csv`` (path, node, time, x_1..x_m) and ``events.csv``
    (path, time, component, mark_index); indices are 0-based."""
    out_dir = Path(out_dir)
    n, n_nodes, m = bundle.states.shape
    nodes = bundle.grid.nodes

    def state_rows():
        for p in range(n):
            for i in range(n_nodes):
                yield (p, i, nodes[i], *bundle.states[p, i])

    ev = bundle.events
    p1 = write_csv(out_dir / "paths.csv", ["path", "node", "time"] + [f"x_{j + 1}" for j in range(m)],
                   state_rows(), bundle.seed, config)
    p2 = write_csv(out_dir / "events.csv", ["path", "time", "component", "mark_index"],
                   zip(ev.path, ev.time, ev.component, ev.mark_index), bundle.seed, config)
    return p1, p2


def dump_solution(sol: BackwardSolution, out_dir: Path, seed: int, config: dict) -> tuple[Path, Path]:
    """``solution.csv`` (node, time, path, Y, Z_1..Z_d, Gamma) and
    ``coefficients.csv`` (quantity, node, basis_index, coefficient)."""
    out_dir = Path(out_dir)
    n, n_nodes = sol.Y.shape
    d = sol.Z.shape[2]
    nodes = sol.grid.nodes

    def rows():
        for i in range(n_nodes):
            for p in range(n):
                yield (i, nodes[i], p, sol.Y[p, i], *sol.Z[p, i], sol.Gamma[p, i])

    p1 = write_csv(out_dir / "solution.csv",
                   ["node", "time", "path", "Y"] + [f"Z_{q + 1}" for q in range(d)] + ["Gamma"],
                   rows(), seed, config)
    names = ["Yhat"] + [f"Z_{q + 1}" for q in range(d)] + ["Gamma"]

    def coef_rows():
        for i, (fc, fzg) in enumerate(zip(sol.fits_cont, sol.fits_zg)):
            if fc is None:
                continue
            for fit, cols in ((fc, names[:1]), (fzg, names[1:])):
                scale = 1.0 if fit is fc else 1.0 / float(nodes[i + 1] - nodes[i])
                for j in range(fit.mean.shape[0]):
                    yield ("x_mean_%d" % (j + 1), i, -1, fit.mean[j])
                    yield ("x_std_%d" % (j + 1), i, -1, fit.std[j])
                for c, name in enumerate(cols):
                    for b in range(fit.coef.shape[0]):
                        yield (name, i, b, fit.coef[b, c] * scale)

    p2 = write_csv(out_dir / "coefficients.csv", ["quantity", "node", "basis_index", "coefficient"],
                   coef_rows(), seed, config)
    return p1, p2
