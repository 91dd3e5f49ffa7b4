"""Serialisation helpers: canonical JSON, CSV tables, run manifests."""

from __future__ import annotations

import hashlib
import json
import math
import platform
from pathlib import Path

import numpy as np

TRAJECTORY_SCHEMA = "ttsdiffusion.trajectory/1"


def _clean(obj):
    """Make ``obj`` JSON-safe: numpy to python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def canonical_json(obj) -> str:
    """Deterministic JSON text (sorted keys, shortest float repr)."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(_clean(cfg), sort_keys=True).encode()).hexdigest()


def write_json(path, obj, chash: str | None = None) -> Path:
    path = Path(path)
    if chash is not None:
        obj = dict(obj, config_hash=chash)
    path.write_text(canonical_json(obj))
    return path


def write_csv(path, header, rows, chash: str | None = None) -> Path:
    """CSV with a ``# config_hash=...`` comment line and full-precision floats."""
    path = Path(path)
    lines = []
    if chash is not None:
        lines.append(f"# config_hash={chash}")
    lines.append(",".join(header))
    for r in rows:
        lines.append(",".join(_fmt(v) for v in r))
    path.write_text("\n".join(lines) + "\n")
    return path


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def read_csv(path) -> tuple[list, np.ndarray]:
    """Header and numeric body of a file written by :func:`write_csv`."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    body = np.array([[float(x) if x else np.nan for x in ln.split(",")] for ln in lines[1:]])
    return header, body


# -- trajectories ----------------------------------------------------------------

def trajectory_header(n: int) -> list:
    return (["t"] + [f"phi_{j + 1}" for j in range(n)] + [f"I_{j + 1}" for j in range(n)]
            + ["q", "p", "energy"])


def trajectory_to_csv(traj, path, chash: str | None = None) -> Path:
    n = traj.phi.shape[1]
    data = np.column_stack([traj.times, traj.phi, traj.I, traj.q, traj.p, traj.energy])
    return write_csv(path, trajectory_header(n), data.tolist(), chash)


def trajectory_record(traj) -> dict:
    return dict(schema=TRAJECTORY_SCHEMA, n=int(traj.phi.shape[1]), n_samples=len(traj),
                t_min=float(traj.times[0]), t_max=float(traj.times[-1]),
                energy_drift=traj.energy_drift, columns=trajectory_header(traj.phi.shape[1]),
                first=_clean(np.concatenate([[traj.times[0]], traj.phi[0], traj.I[0],
                                             [traj.q[0], traj.p[0], traj.energy[0]]])),
                last=_clean(np.concatenate([[traj.times[-1]], traj.phi[-1], traj.I[-1],
                                            [traj.q[-1], traj.p[-1], traj.energy[-1]]])))


def trajectory_from_csv(path):
    from .system import Trajectory
    header, body = read_csv(path)
    n = (len(header) - 4) // 2
    return Trajectory(body[:, 0], body[:, 1:1 + n], body[:, 1 + n:1 + 2 * n],
                      body[:, 1 + 2 * n], body[:, 2 + 2 * n], body[:, 3 + 2 * n])


def versions() -> dict:
    import scipy
    import yaml
    from . import __version__
    return dict(ttsdiffusion=__version__, numpy=np.__version__, scipy=scipy.__version__,
                pyyaml=yaml.__version__, python=platform.python_version())
