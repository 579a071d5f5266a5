"""Matched-filter angle-Doppler imaging on the shared estimator grid kernel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ArrayConfig, CodeMatrix, Snapshot
from .relax import Grids, grid_objective

DB_FLOOR = -80.0


@dataclass(frozen=True)
class AngleDopplerImage:
    """Peak-normalized image in dB; rows angles ascending, columns Dopplers."""

    values: np.ndarray
    angle_grid: np.ndarray
    doppler_grid: np.ndarray
    reference: float

    def __post_init__(self) -> None:
        for name in ("values", "angle_grid", "doppler_grid"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)

    @property
    def peak_cell(self) -> tuple[int, int]:
        row, col = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return int(row), int(col)


def mf_image(
    snapshot: Snapshot,
    code: CodeMatrix,
    cfg: ArrayConfig,
    grids: Grids,
    method: str = "auto",
) -> AngleDopplerImage:
    """The single-target ML criterion over the whole grid, in dB below its peak.

    No target subtraction: this is the plain matched-filter map of the raw
    snapshot. The floor clamp keeps exported values finite.
    """
    obj = grid_objective(snapshot, code, cfg, grids, method=method)
    reference = float(np.max(obj))
    if reference <= 0.0:
        values = np.full(obj.shape, DB_FLOOR)
    else:
        with np.errstate(divide="ignore"):
            values = 10.0 * np.log10(obj / reference)
        values = np.maximum(values, DB_FLOOR)
        values[obj == reference] = 0.0
    return AngleDopplerImage(
        values=values,
        angle_grid=grids.theta_values,
        doppler_grid=grids.omega_values,
        reference=reference,
    )
