"""Exact Fisher information of the snapshot model and the Cramer-Rao bound.

The real parameter vector is phi = [theta_1..theta_K, omega_1..omega_K,
Re b_1..Re b_K, Im b_1..Im b_K]. For a complex Gaussian snapshot with mean
mu(phi) and white noise sigma^2, F_ij = (2/sigma^2) Re{d mu^H/d phi_i
d mu/d phi_j}; the blocks below evaluate those inner products in closed form
as Hadamard products of Gram matrices. A finite-difference Jacobian oracle
provides an independent route for validation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    ArrayConfig,
    CodeMatrix,
    TargetScene,
    doppler_steering,
    rx_steering,
    rx_steering_deriv,
    tx_steering,
    tx_steering_deriv,
)

CONDITION_LIMIT = 1e12


class IdentifiabilityError(Exception):
    """FIM too ill-conditioned to invert; carries the condition estimate."""

    def __init__(self, condition: float):
        super().__init__(
            f"Fisher matrix condition estimate {condition:.3e} exceeds {CONDITION_LIMIT:.0e}; "
            "parameters are not identifiable at working precision"
        )
        self.condition = condition


@dataclass(frozen=True)
class CrbMatrix:
    entries: np.ndarray
    condition: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", arr)
        arr.setflags(write=False)

    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries)

    def trace(self, selection: np.ndarray | list[int] | None = None) -> float:
        d = self.diagonal()
        if selection is not None:
            d = d[np.asarray(selection, dtype=int)]
        return float(np.sum(d))


@dataclass(frozen=True)
class FimMatrix:
    """Real symmetric information matrix plus the noise power it was built at."""

    entries: np.ndarray
    noise_power: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("FIM must be square")
        object.__setattr__(self, "entries", arr)
        arr.setflags(write=False)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def restrict(self, indices: np.ndarray | list[int]) -> "FimMatrix":
        """Sub-FIM for a reduced parameter set (the dropped ones treated as known)."""
        idx = np.asarray(indices, dtype=int)
        return FimMatrix(self.entries[np.ix_(idx, idx)], self.noise_power)

    def condition(self) -> float:
        ev = np.linalg.eigvalsh(self.entries)
        lo = float(ev[0])
        hi = float(ev[-1])
        if lo <= 0:
            return np.inf
        return hi / lo

    def crb(self) -> CrbMatrix:
        cond = self.condition()
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            raise IdentifiabilityError(cond)
        inv = np.linalg.inv(self.entries)
        return CrbMatrix(0.5 * (inv + inv.T), cond)


def model_matrices(
    scene: TargetScene, code: CodeMatrix, cfg: ArrayConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Column-stacked (A_r, dA_r, V, dV_theta, dV_omega, B) for all K targets."""
    if scene.size < 1:
        raise ValueError("scene has no targets")
    thetas = scene.azimuths
    omegas = scene.dopplers
    n = np.arange(cfg.pri_count)
    ar = np.stack([rx_steering(t, cfg) for t in thetas], axis=1)
    dar = np.stack([rx_steering_deriv(t, cfg) for t in thetas], axis=1)
    at = np.stack([tx_steering(t, cfg) for t in thetas], axis=1)
    dat = np.stack([tx_steering_deriv(t, cfg) for t in thetas], axis=1)
    dop = np.stack([doppler_steering(w, cfg.pri_count) for w in omegas], axis=1)
    v = (code.entries.T @ at) * dop
    dv_theta = (code.entries.T @ dat) * dop
    dv_omega = 1j * n[:, None] * v
    b = np.diag(scene.amplitudes)
    return ar, dar, v, dv_theta, dv_omega, b


def _blocks_from_grams(
    ar_gram: dict[str, np.ndarray], v_gram: dict[str, np.ndarray], b: np.ndarray
) -> np.ndarray:
    """Assemble the complex 4K x 4K block matrix from precomputed Gram products.

    Keys: ar_gram has 'aa','da','ad','dd' (A_r^H A_r etc. with d marking the
    derivative factor); v_gram has 'vv','vt','tv','tt','vw','tw','wv','ww'
    (t = theta derivative, w = omega derivative, first letter = conjugated side).
    """
    bo = np.outer(b.conj(), b)
    bc = b.conj()[:, None]
    f11 = (
        ar_gram["dd"] * (bo * v_gram["vv"])
        + ar_gram["da"] * (bo * v_gram["vt"])
        + ar_gram["ad"] * (bo * v_gram["tv"])
        + ar_gram["aa"] * (bo * v_gram["tt"])
    )
    f12 = ar_gram["da"] * (bo * v_gram["vw"]) + ar_gram["aa"] * (bo * v_gram["tw"])
    f13 = ar_gram["da"] * (bc * v_gram["vv"]) + ar_gram["aa"] * (bc * v_gram["tv"])
    f22 = ar_gram["aa"] * (bo * v_gram["ww"])
    f23 = ar_gram["aa"] * (bc * v_gram["wv"])
    f33 = ar_gram["aa"] * v_gram["vv"]
    return np.block(
        [
            [f11, f12, f13, 1j * f13],
            [f12.T, f22, f23, 1j * f23],
            [f13.T, f23.T, f33, 1j * f33],
            [1j * f13.T, 1j * f23.T, 1j * f33.T, f33],
        ]
    )


def assemble_fim(scene: TargetScene, code: CodeMatrix, cfg: ArrayConfig) -> FimMatrix:
    """Closed-form FIM over [theta, omega, Re b, Im b] blocks.

    Every block is a Hadamard product of receive-array Grams, amplitude
    outer products, and slow-time Grams of V and its derivatives. Inside
    Re{.} the plain-transposed lower blocks equal the Hermitian ones, so the
    result is exactly symmetric.
    """
    if scene.noise_power <= 0:
        raise ValueError("FIM requires sigma^2 > 0")
    ar, dar, v, dvt, dvw, bdiag = model_matrices(scene, code, cfg)
    b = np.diag(bdiag)
    ar_gram = {
        "aa": ar.conj().T @ ar,
        "da": dar.conj().T @ ar,
        "ad": ar.conj().T @ dar,
        "dd": dar.conj().T @ dar,
    }
    v_gram = {
        "vv": v.conj().T @ v,
        "vt": v.conj().T @ dvt,
        "tv": dvt.conj().T @ v,
        "tt": dvt.conj().T @ dvt,
        "vw": v.conj().T @ dvw,
        "tw": dvt.conj().T @ dvw,
        "wv": dvw.conj().T @ v,
        "ww": dvw.conj().T @ dvw,
    }
    f_complex = _blocks_from_grams(ar_gram, v_gram, b)
    f = (2.0 / scene.noise_power) * np.real(f_complex)
    return FimMatrix(0.5 * (f + f.T), scene.noise_power)


def _mean_vector(
    thetas: np.ndarray, omegas: np.ndarray, amps: np.ndarray, code: CodeMatrix, cfg: ArrayConfig
) -> np.ndarray:
    """Vectorized noiseless snapshot mean for the finite-difference oracle."""
    x = np.zeros((cfg.rx_count, cfg.pri_count), dtype=complex)
    n = np.arange(cfg.pri_count)
    for theta, omega, b in zip(thetas, omegas, amps):
        v = (code.entries.T @ tx_steering(theta, cfg)) * np.exp(1j * omega * n)
        x += b * np.outer(rx_steering(theta, cfg), v)
    return x.ravel()


def fim_numeric_oracle(
    scene: TargetScene, code: CodeMatrix, cfg: ArrayConfig, step: float = 1e-6
) -> FimMatrix:
    """Independent FIM route: central-difference Jacobian J, then (2/sigma^2) Re{J^H J}.

    Knows nothing of the block structure; used to validate assemble_fim.
    """
    if not 1e-8 <= step <= 1e-4:
        raise ValueError("step must lie in [1e-8, 1e-4]")
    if scene.noise_power <= 0:
        raise ValueError("FIM requires sigma^2 > 0")
    k = scene.size
    thetas = scene.azimuths
    omegas = scene.dopplers
    amps = scene.amplitudes
    cols = []
    for i in range(4 * k):
        block, j = divmod(i, k)
        dth = np.zeros(k)
        dom = np.zeros(k)
        dam = np.zeros(k, dtype=complex)
        if block == 0:
            dth[j] = step
        elif block == 1:
            dom[j] = step
        elif block == 2:
            dam[j] = step
        else:
            dam[j] = 1j * step
        hi = _mean_vector(thetas + dth, omegas + dom, amps + dam, code, cfg)
        lo = _mean_vector(thetas - dth, omegas - dom, amps - dam, code, cfg)
        cols.append((hi - lo) / (2.0 * step))
    jac = np.stack(cols, axis=1)
    f = (2.0 / scene.noise_power) * np.real(jac.conj().T @ jac)
    return FimMatrix(0.5 * (f + f.T), scene.noise_power)


def fim_with_unknown_noise(fim: FimMatrix, cfg: ArrayConfig) -> FimMatrix:
    """Append the (sigma, sigma) information 4 N Mr / sigma^2; coupling is zero."""
    n4 = fim.size
    out = np.zeros((n4 + 1, n4 + 1))
    out[:n4, :n4] = fim.entries
    out[n4, n4] = 4.0 * cfg.pri_count * cfg.rx_count / fim.noise_power
    return FimMatrix(out, fim.noise_power)


def crb(fim: FimMatrix) -> CrbMatrix:
    return fim.crb()


def trace_crb(fim: FimMatrix, selection: np.ndarray | list[int] | None = None) -> float:
    """Trace of the CRB restricted to selected parameter indices (default all)."""
    return fim.crb().trace(selection)


def angle_doppler_indices(k: int) -> np.ndarray:
    """Indices of the theta and omega rows inside the 4K parameter ordering."""
    return np.arange(2 * k)
