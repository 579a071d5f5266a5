"""Canonical JSON/CSV document formats.

One schema for everything: JSON objects with a "type" tag, complex numbers
as [re, im] pairs, arrays as nested lists. Writers are deterministic (sorted
keys, fixed indentation, repr-exact floats, trailing newline) so identical
inputs produce byte-identical files. Non-finite floats (the -inf BIC
sentinel) serialize as null.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .model import ArrayConfig, CodeMatrix, Snapshot, Target, TargetScene


def _clean(value: Any) -> Any:
    """Recursively convert numpy scalars/arrays and drop non-finite floats."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return complex_pair(value)
    if isinstance(value, (np.floating, float)):
        f = float(value)
        return f if math.isfinite(f) else None
    return value


def complex_pair(z: complex) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def pair_complex(pair: Any) -> complex:
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise ValueError(f"expected [re, im] pair, got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def dump_json(doc: dict, path: str | Path) -> None:
    text = json.dumps(_clean(doc), sort_keys=True, indent=2)
    Path(path).write_text(text + "\n")


def load_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# model documents


def array_doc(cfg: ArrayConfig) -> dict:
    return {
        "type": "array_config",
        "tx_count": cfg.tx_count,
        "rx_count": cfg.rx_count,
        "tx_spacing": cfg.tx_spacing,
        "rx_spacing": cfg.rx_spacing,
        "wavelength": cfg.wavelength,
        "pri_count": cfg.pri_count,
    }


def doc_array(doc: dict) -> ArrayConfig:
    return ArrayConfig(
        tx_count=int(doc["tx_count"]),
        rx_count=int(doc["rx_count"]),
        tx_spacing=float(doc["tx_spacing"]),
        rx_spacing=float(doc["rx_spacing"]),
        wavelength=float(doc["wavelength"]),
        pri_count=int(doc["pri_count"]),
    )


def target_doc(t: Target) -> dict:
    return {
        "azimuth": t.azimuth,
        "doppler": t.doppler,
        "amplitude": complex_pair(t.amplitude),
    }


def doc_target(doc: dict) -> Target:
    return Target(
        azimuth=float(doc["azimuth"]),
        doppler=float(doc["doppler"]),
        amplitude=pair_complex(doc["amplitude"]),
    )


def scene_doc(scene: TargetScene) -> dict:
    return {
        "type": "target_scene",
        "noise_power": scene.noise_power,
        "targets": [target_doc(t) for t in scene.targets],
    }


def doc_scene(doc: dict) -> TargetScene:
    return TargetScene(
        targets=tuple(doc_target(t) for t in doc["targets"]),
        noise_power=float(doc["noise_power"]),
    )


def code_doc(code: CodeMatrix) -> dict:
    return {
        "type": "code_matrix",
        "tx_count": code.tx_count,
        "pri_count": code.pri_count,
        "entries": [[complex_pair(z) for z in row] for row in code.entries],
    }


def doc_code(doc: dict) -> CodeMatrix:
    entries = np.array(
        [[pair_complex(z) for z in row] for row in doc["entries"]], dtype=complex
    )
    return CodeMatrix(entries)


# ---------------------------------------------------------------------------
# CSV


def write_snapshot_csv(snapshot: Snapshot, path: str | Path) -> None:
    """One row per receive element; columns re/im interleaved per PRI."""
    rows = []
    for row in snapshot.data:
        cells: list[str] = []
        for z in row:
            cells.append(repr(float(z.real)))
            cells.append(repr(float(z.imag)))
        rows.append(",".join(cells))
    Path(path).write_text("\n".join(rows) + "\n")


def read_snapshot_csv(path: str | Path) -> Snapshot:
    rows = []
    for line in Path(path).read_text().strip().splitlines():
        vals = [float(v) for v in line.split(",")]
        if len(vals) % 2:
            raise ValueError("snapshot CSV must have interleaved re/im columns")
        arr = np.array(vals).reshape(-1, 2)
        rows.append(arr[:, 0] + 1j * arr[:, 1])
    return Snapshot(np.stack(rows))


def write_matrix_csv(matrix: np.ndarray, path: str | Path) -> None:
    rows = [",".join(repr(float(v)) for v in row) for row in np.asarray(matrix, dtype=float)]
    Path(path).write_text("\n".join(rows) + "\n")


MC_CSV_COLUMNS = ("snr_db", "rmse_theta", "rcrb_theta", "rmse_omega", "rcrb_omega", "failures")


def write_mc_csv(points: list[dict], path: str | Path) -> None:
    """Frozen column schema; one row per SNR sweep point."""
    lines = [",".join(MC_CSV_COLUMNS)]
    for p in points:
        cells = []
        for col in MC_CSV_COLUMNS:
            v = p[col]
            cells.append(str(int(v)) if col == "failures" else repr(float(v)))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")
