"""Run configuration, snapshot files, manifests and checkpoints.

Snapshot format: raw little-endian float64, complex-interleaved, row-major
over frequencies w in {-N..N}^2 (centered layout), plus a JSON sidecar with
{macro_time, gamma, regime, N, seed, checksum}.  Checksums are sha256 of
the raw payload; round trips are bit-exact.
"""

import hashlib
import json
import pickle
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .fields import FieldSnapshot
from .fourier import from_centered, to_centered
from .lattice import SUPPORT_RADIUS
from .scaling import Regime


class ConfigError(ValueError):
    pass


_DEFAULTS = {
    "regime": "phi4",
    "a_c": 1.0,
    "frak_a1": 0.0,
    "frak_a3": 0.0,
    "profile_id": "poly_ring",
    "t_end": 0.25,
    "snapshot_times": [],
    "replicas": 1,
    "seed": 0,
    "init": "ptilde",
    "mode": "real",
    "refresh_interval": 1_000_000,
    "stop_enabled": False,
    "stop_mfrak": 10.0,
    "stop_nu": 0.1,
    "stop_check_dt": 0.05,
}


def load_config(path):
    """Parse and cross-validate a TOML run configuration."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return validate_config(raw)


def validate_config(raw):
    cfg = dict(_DEFAULTS)
    cfg.update(raw)
    errors = []
    if cfg.get("gamma") is None:
        errors.append("gamma: required")
        raise ConfigError("; ".join(errors))
    g = cfg["gamma"]
    if not (0.0 < g < 1.0 / 3.0):
        errors.append(f"gamma: gamma < 1/3 required (got {g})")
    if cfg["regime"] not in ("phi4", "phi6"):
        errors.append(f"regime: must be phi4 or phi6 (got {cfg['regime']!r})")
    if errors:
        raise ConfigError("; ".join(errors))
    regime = Regime(cfg["regime"])
    n = regime.torus_n(g)
    cfg["torus_n"] = n
    if SUPPORT_RADIUS / g > n:
        errors.append(f"gamma: kernel support {SUPPORT_RADIUS / g:.1f} exceeds N={n}")
    if cfg["t_end"] < 0:
        errors.append("t_end: must be >= 0")
    if not cfg["snapshot_times"]:
        cfg["snapshot_times"] = [cfg["t_end"]]  # final-time snapshot implied
    if any(t < 0 or t > cfg["t_end"] + 1e-12 for t in cfg["snapshot_times"]):
        errors.append("snapshot_times: must lie in [0, t_end]")
    if cfg["replicas"] < 1:
        errors.append("replicas: must be >= 1")
    if "dt" in cfg and "t_end" in cfg and cfg.get("dt", 1) > max(cfg["t_end"], 1e-300):
        errors.append("dt: exceeds t_end")
    if errors:
        raise ConfigError("; ".join(errors))
    return cfg


def config_digest(cfg):
    blob = json.dumps({k: v for k, v in sorted(cfg.items())}, default=str,
                      sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Snapshot files
# ---------------------------------------------------------------------------

def write_snapshot(path, snapshot, seed=None):
    path = Path(path)
    cen = to_centered(snapshot.fourier).astype(np.complex128)
    payload = cen.astype("<c16").tobytes()
    digest = hashlib.sha256(payload).hexdigest()
    sidecar = {
        "macro_time": snapshot.macro_time,
        "gamma": None if np.isnan(snapshot.gamma) else snapshot.gamma,
        "regime": snapshot.regime,
        "n": snapshot.n,
        "seed": seed,
        "checksum": digest,
    }
    path.write_bytes(payload)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=1))
    return digest


def read_snapshot(path):
    path = Path(path)
    payload = path.read_bytes()
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    digest = hashlib.sha256(payload).hexdigest()
    if digest != sidecar["checksum"]:
        raise IOError(f"checksum mismatch for {path}")
    n = sidecar["n"]
    side = 2 * n + 1
    arr = np.frombuffer(payload, dtype="<c16")
    if arr.size != side * side:
        raise IOError(f"array length {arr.size} inconsistent with sidecar N={n}")
    cen = arr.reshape(side, side).astype(np.complex128)
    return FieldSnapshot(
        from_centered(cen),
        macro_time=sidecar["macro_time"],
        gamma=sidecar["gamma"] if sidecar["gamma"] is not None else float("nan"),
        regime=sidecar.get("regime", ""),
    )


# ---------------------------------------------------------------------------
# Kernel dump
# ---------------------------------------------------------------------------

def write_kernel(path, kernel):
    path = Path(path)
    cen = to_centered(kernel.values)
    payload = cen.astype("<f8").tobytes()
    digest = hashlib.sha256(payload).hexdigest()
    sidecar = {
        "gamma": kernel.gamma,
        "n": kernel.torus.n,
        "profile_id": kernel.profile_id,
        "raw_sum": kernel.raw_sum,
        "checksum": digest,
    }
    path.write_bytes(payload)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=1))
    return digest


# ---------------------------------------------------------------------------
# Manifests and checkpoints
# ---------------------------------------------------------------------------

def write_manifest(out_dir, cfg, files, wall_seconds):
    out_dir = Path(out_dir)
    inventory = {}
    for f in files:
        p = Path(f)
        inventory[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
    manifest = {
        "config": {k: v for k, v in cfg.items()},
        "config_digest": config_digest(cfg),
        "code_version": _code_version(),
        "wall_seconds": wall_seconds,
        "files": inventory,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, default=str))
    return manifest


def verify_manifest(out_dir):
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    bad = []
    for name, digest in manifest["files"].items():
        p = out_dir / name
        if not p.exists():
            bad.append(f"{name}: missing")
        elif hashlib.sha256(p.read_bytes()).hexdigest() != digest:
            bad.append(f"{name}: checksum mismatch")
    return bad


def _code_version():
    try:
        from importlib.metadata import version
        return version("kacbc")
    except Exception:
        return "unknown"


def save_checkpoint(path, sim_checkpoint, meta=None):
    with open(path, "wb") as fh:
        pickle.dump({"state": sim_checkpoint, "meta": meta or {}}, fh)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = pickle.load(fh)
    return blob["state"], blob["meta"]


def replica_seed(global_seed, replica_index):
    """Documented per-replica stream: SeedSequence(global_seed, spawn_key=(r,))."""
    return np.random.SeedSequence(entropy=global_seed, spawn_key=(replica_index,))
