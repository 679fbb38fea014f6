"""Experiment configuration: a flat JSON object with a fixed set of keys.

Keys
----
experiment : str
    One of :data:`EXPERIMENTS`.
flow : str
    ``"disk"`` (keys ``center``, ``R``), ``"star"`` (``center``, ``R0``,
    ``eps``, ``m``) or ``"annulus"`` (``center``, ``c``, ``a1``, ``b1``).
n : int
    Sites per side, 8 to 512.
M : int
    Number of shells, 2 to 512.  ``"layers"`` picks one lattice layer
    per shell for the disk flow.
mode : str
    ``"exact"`` or ``"kernel"``.
seed : int
    Master seed, 0 to 2**64 - 1.
samples : int
    Monte Carlo sample count, 2 to 10**7.
batch : int
    Samples per batch (memory knob; it can change at most the last bit
    of sampled values).
times : list of float
    Times on the grid used by sampling experiments.
t : float
    Time for single-time experiments.
pairs : int
    Number of random site pairs or random trials.
probes : list of objects
    Test functions ``{"kind": "point-mass-at", "point": [x, y]}``,
    ``{"kind": "gaussian-bump", "center": [x, y], "width": w}`` or
    ``{"kind": "indicator-of-disk", "center": [x, y], "radius": r}``.
spectral : bool
    Also run the spectral-oracle sampler (covariance experiment).
residual_tol : float
    Relative residual accepted from Poisson solves.
dump_operator : bool
    Write the operator blocks to ``operator.bin``.
out : str
    Output directory (the ``--out`` flag takes precedence).
"""
from __future__ import annotations

import hashlib
import json
import math

from ..errors import ConfigError

__all__ = ["EXPERIMENTS", "DEFAULTS", "load_config", "normalize_config", "config_digest"]

EXPERIMENTS = (
    "verify-gram",
    "verify-lemma",
    "verify-hadamard-identity",
    "covariance",
    "trajectory",
    "circle-average",
    "boundary-noise",
    "kappa-curve",
)

DEFAULTS = {
    "flow": "disk",
    "center": [0.0, 0.0],
    "R": 1.0,
    "R0": 1.0,
    "eps": 0.2,
    "m": 3,
    "c": 0.5,
    "a1": 0.2,
    "b1": 0.9,
    "n": 48,
    "M": 16,
    "mode": "exact",
    "seed": 0,
    "samples": 20000,
    "batch": 1000,
    "times": [0.3, 0.5, 0.7, 0.9],
    "t": 0.75,
    "pairs": 10,
    "probes": [],
    "spectral": False,
    "residual_tol": 1e-10,
    "dump_operator": False,
    "out": "results",
}

_PROBE_KEYS = {
    "point-mass-at": {"point"},
    "gaussian-bump": {"center", "width"},
    "indicator-of-disk": {"center", "radius"},
}


def _int(cfg, key, lo, hi):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, int) or not lo <= v <= hi:
        raise ConfigError(f"{key!r} must be an integer in [{lo}, {hi}], got {v!r}")


def _float(cfg, key, lo, hi, open_lo=False):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key!r} must be a finite number, got {v!r}")
    if v > hi or v < lo or (open_lo and v == lo):
        raise ConfigError(f"{key!r} must lie in {'(' if open_lo else '['}{lo}, {hi}], got {v!r}")
    cfg[key] = float(v)


def _point(v, key):
    if (not isinstance(v, (list, tuple)) or len(v) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)):
        raise ConfigError(f"{key!r} must be a pair of numbers, got {v!r}")
    return [float(v[0]), float(v[1])]


def normalize_config(raw: dict) -> dict:
    """Validate keys and ranges and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(DEFAULTS) - {"experiment"})
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}")
    if "experiment" not in raw:
        raise ConfigError("missing required key 'experiment'")
    cfg = dict(DEFAULTS)
    cfg.update(raw)
    if cfg["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"'experiment' must be one of {', '.join(EXPERIMENTS)}; got {cfg['experiment']!r}")
    if cfg["flow"] not in ("disk", "star", "annulus"):
        raise ConfigError(f"'flow' must be disk, star or annulus; got {cfg['flow']!r}")
    if cfg["mode"] not in ("exact", "kernel"):
        raise ConfigError(f"'mode' must be exact or kernel; got {cfg['mode']!r}")
    cfg["center"] = _point(cfg["center"], "center")
    _int(cfg, "n", 8, 512)
    if cfg["M"] != "layers":
        _int(cfg, "M", 2, 512)
    _int(cfg, "seed", 0, 2 ** 64 - 1)
    _int(cfg, "samples", 2, 10 ** 7)
    _int(cfg, "batch", 1, 10 ** 6)
    _int(cfg, "pairs", 1, 10 ** 4)
    _int(cfg, "m", 0, 64)
    for key in ("R", "R0", "c", "a1", "b1"):
        _float(cfg, key, 0.0, 1e6, open_lo=True)
    _float(cfg, "eps", -0.999, 0.999)
    _float(cfg, "t", 0.0, 1.0, open_lo=True)
    _float(cfg, "residual_tol", 0.0, 1e-2, open_lo=True)
    if not isinstance(cfg["times"], list) or not cfg["times"]:
        raise ConfigError("'times' must be a nonempty list of numbers")
    times = []
    for t in cfg["times"]:
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not 0 < t <= 1:
            raise ConfigError(f"'times' entries must lie in (0, 1], got {t!r}")
        times.append(float(t))
    cfg["times"] = times
    for key in ("spectral", "dump_operator"):
        if not isinstance(cfg[key], bool):
            raise ConfigError(f"{key!r} must be true or false")
    if not isinstance(cfg["out"], str) or not cfg["out"]:
        raise ConfigError("'out' must be a nonempty string")
    if not isinstance(cfg["probes"], list):
        raise ConfigError("'probes' must be a list")
    probes = []
    for p in cfg["probes"]:
        if not isinstance(p, dict) or p.get("kind") not in _PROBE_KEYS:
            raise ConfigError(f"probe must be an object with kind in {sorted(_PROBE_KEYS)}; got {p!r}")
        need = _PROBE_KEYS[p["kind"]]
        extra = sorted(set(p) - need - {"kind"})
        if extra:
            raise ConfigError(f"unknown probe key {extra[0]!r}")
        missing = sorted(need - set(p))
        if missing:
            raise ConfigError(f"probe {p['kind']} needs key {missing[0]!r}")
        q = {"kind": p["kind"]}
        for key in sorted(need):
            if key in ("point", "center"):
                q[key] = _point(p[key], key)
            else:
                v = p[key]
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                    raise ConfigError(f"probe {key!r} must be positive, got {v!r}")
                q[key] = float(v)
        probes.append(q)
    cfg["probes"] = probes
    return cfg


def load_config(path) -> dict:
    """Read and validate a JSON config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return normalize_config(raw)


def config_digest(cfg: dict) -> str:
    """SHA-256 of the canonical JSON form, output location excluded."""
    body = {k: v for k, v in cfg.items() if k != "out"}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
