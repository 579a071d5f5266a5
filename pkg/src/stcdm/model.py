"""Array geometry, target scenes, slow-time codes, and snapshot synthesis.

The observation model is a single range bin across one coherent processing
interval: an Mr x N complex snapshot

    X = sum_k a_r(theta_k) b_k v(theta_k, omega_k)^T + E,

where v(theta, omega)[n] = (c_n^T a_t(theta)) e^{j omega n} combines the
per-PRI transmit code column c_n with the Doppler progression, and E is
circularly symmetric white Gaussian noise with per-entry variance sigma^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ArrayConfig:
    """Collocated MIMO geometry plus the CPI length.

    Element 0 of each array is the phase reference; indices run 0..M-1.
    """

    tx_count: int
    rx_count: int
    tx_spacing: float
    rx_spacing: float
    wavelength: float
    pri_count: int

    def __post_init__(self) -> None:
        if self.tx_count < 1 or self.rx_count < 1:
            raise ValueError("antenna counts must be >= 1")
        if self.pri_count < 2:
            raise ValueError("pri_count must be >= 2")
        if min(self.tx_spacing, self.rx_spacing, self.wavelength) <= 0:
            raise ValueError("spacings and wavelength must be > 0")

    @property
    def virtual_size(self) -> int:
        return self.tx_count * self.rx_count

    @property
    def virtual_uniform(self) -> bool:
        """True when d_t = Mr * d_r, i.e. the virtual array is a filled ULA."""
        ratio = self.tx_spacing / self.rx_spacing
        return abs(ratio - round(ratio)) < 1e-9 and round(ratio) == self.rx_count

    @property
    def aperture(self) -> float:
        """Extent of the virtual array in meters."""
        return self.tx_spacing * (self.tx_count - 1) + self.rx_spacing * (self.rx_count - 1)

    @property
    def beamwidth(self) -> float:
        """Nominal angular resolution lambda / aperture, radians."""
        return self.wavelength / max(self.aperture, self.wavelength)


def wrap_pm_pi(omega: float) -> float:
    """Wrap a Doppler shift to [-pi, pi)."""
    return float((omega + np.pi) % TWO_PI - np.pi)


@dataclass(frozen=True)
class Target:
    azimuth: float
    doppler: float
    amplitude: complex

    def __post_init__(self) -> None:
        if not -np.pi / 2 < self.azimuth < np.pi / 2:
            raise ValueError(f"azimuth {self.azimuth} outside (-pi/2, pi/2)")
        object.__setattr__(self, "doppler", wrap_pm_pi(self.doppler))
        object.__setattr__(self, "amplitude", complex(self.amplitude))


@dataclass(frozen=True)
class TargetScene:
    """An ordered set of point targets plus the noise floor.

    sigma^2 = 0 is accepted for noiseless synthesis; information-matrix
    routines require sigma^2 > 0 and check separately.
    """

    targets: tuple[Target, ...]
    noise_power: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.noise_power < 0:
            raise ValueError("noise_power must be >= 0")
        seen = {(t.azimuth, t.doppler) for t in self.targets}
        if len(seen) != len(self.targets):
            raise ValueError("two targets share an identical (theta, omega) pair")

    @property
    def size(self) -> int:
        return len(self.targets)

    @property
    def azimuths(self) -> np.ndarray:
        return np.array([t.azimuth for t in self.targets])

    @property
    def dopplers(self) -> np.ndarray:
        return np.array([t.doppler for t in self.targets])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([t.amplitude for t in self.targets], dtype=complex)


@dataclass(frozen=True)
class CodeMatrix:
    """Unimodular Mt x N slow-time code; column n is transmitted on PRI n."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.entries, dtype=complex)
        if arr.ndim != 2:
            raise ValueError("code matrix must be 2-D")
        if np.max(np.abs(np.abs(arr) - 1.0)) > 1e-12:
            raise ValueError("code entries must have unit modulus within 1e-12")
        object.__setattr__(self, "entries", arr)
        arr.setflags(write=False)

    @property
    def tx_count(self) -> int:
        return self.entries.shape[0]

    @property
    def pri_count(self) -> int:
        return self.entries.shape[1]

    @property
    def phases(self) -> np.ndarray:
        return np.angle(self.entries)


@dataclass(frozen=True)
class Snapshot:
    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=complex)
        if arr.ndim != 2:
            raise ValueError("snapshot must be 2-D")
        object.__setattr__(self, "data", arr)
        arr.setflags(write=False)

    @property
    def rx_count(self) -> int:
        return self.data.shape[0]

    @property
    def pri_count(self) -> int:
        return self.data.shape[1]


def _steering(theta: float, count: int, spacing: float, wavelength: float) -> np.ndarray:
    if not -np.pi / 2 < theta < np.pi / 2:
        raise ValueError(f"theta {theta} outside (-pi/2, pi/2)")
    m = np.arange(count)
    return np.exp(-1j * TWO_PI * (spacing / wavelength) * m * np.sin(theta))


def _steering_deriv(theta: float, count: int, spacing: float, wavelength: float) -> np.ndarray:
    m = np.arange(count)
    phase_rate = -1j * TWO_PI * (spacing / wavelength) * m
    return phase_rate * np.cos(theta) * np.exp(phase_rate * np.sin(theta))


def tx_steering(theta: float, cfg: ArrayConfig) -> np.ndarray:
    """Transmit steering vector, element m = e^{-j 2 pi (d_t/lambda) m sin theta}."""
    return _steering(theta, cfg.tx_count, cfg.tx_spacing, cfg.wavelength)


def rx_steering(theta: float, cfg: ArrayConfig) -> np.ndarray:
    return _steering(theta, cfg.rx_count, cfg.rx_spacing, cfg.wavelength)


def tx_steering_deriv(theta: float, cfg: ArrayConfig) -> np.ndarray:
    return _steering_deriv(theta, cfg.tx_count, cfg.tx_spacing, cfg.wavelength)


def rx_steering_deriv(theta: float, cfg: ArrayConfig) -> np.ndarray:
    return _steering_deriv(theta, cfg.rx_count, cfg.rx_spacing, cfg.wavelength)


def doppler_steering(omega: float, pri_count: int) -> np.ndarray:
    """Slow-time progression e^{j omega n}, n = 0..N-1."""
    if pri_count < 1:
        raise ValueError("pri_count must be >= 1")
    return np.exp(1j * omega * np.arange(pri_count))


def v_vector(theta: float, omega: float, code: CodeMatrix, cfg: ArrayConfig) -> np.ndarray:
    """Effective slow-time response, element n = (c_n^T a_t(theta)) e^{j omega n}."""
    if code.tx_count != cfg.tx_count or code.pri_count != cfg.pri_count:
        raise ValueError("code dimensions do not match the array config")
    return (code.entries.T @ tx_steering(theta, cfg)) * doppler_steering(omega, cfg.pri_count)


def steering_derivatives(
    theta: float, omega: float, code: CodeMatrix, cfg: ArrayConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(d a_r/d theta, d v/d theta, d v/d omega) at one target point."""
    if code.tx_count != cfg.tx_count or code.pri_count != cfg.pri_count:
        raise ValueError("code dimensions do not match the array config")
    d = doppler_steering(omega, cfg.pri_count)
    dar = rx_steering_deriv(theta, cfg)
    dv_theta = (code.entries.T @ tx_steering_deriv(theta, cfg)) * d
    n = np.arange(cfg.pri_count)
    dv_omega = 1j * n * (code.entries.T @ tx_steering(theta, cfg)) * d
    return dar, dv_theta, dv_omega


def synthesize(
    scene: TargetScene,
    code: CodeMatrix,
    cfg: ArrayConfig,
    seed: int | np.random.Generator | None = None,
) -> Snapshot:
    """Draw one snapshot X = sum_k a_r b_k v^T + E.

    Noise is i.i.d. circular complex Gaussian, variance sigma^2 per entry
    (sigma^2/2 in each of the real and imaginary parts). sigma^2 = 0 skips
    the draw entirely so noiseless synthesis is exact. Equal seeds give
    bit-identical snapshots.
    """
    if code.tx_count != cfg.tx_count or code.pri_count != cfg.pri_count:
        raise ValueError("code dimensions do not match the array config")
    x = np.zeros((cfg.rx_count, cfg.pri_count), dtype=complex)
    for t in scene.targets:
        x += np.outer(rx_steering(t.azimuth, cfg), t.amplitude * v_vector(t.azimuth, t.doppler, code, cfg))
    if scene.noise_power > 0:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        sig = np.sqrt(scene.noise_power / 2.0)
        shape = (cfg.rx_count, cfg.pri_count)
        x += sig * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return Snapshot(x)


def scene_snr(scene: TargetScene) -> float:
    """SNR in dB, defined against the weakest target: 10 log10(min |b_k|^2 / sigma^2)."""
    if scene.size == 0:
        raise ValueError("scene has no targets")
    if scene.noise_power <= 0:
        raise ValueError("SNR undefined for sigma^2 = 0")
    return float(10.0 * np.log10(np.min(np.abs(scene.amplitudes) ** 2) / scene.noise_power))


def noise_power_for_snr(amplitudes: np.ndarray, snr_db: float) -> float:
    """Invert scene_snr: the sigma^2 that puts the weakest target at snr_db."""
    amplitudes = np.asarray(amplitudes, dtype=complex)
    if amplitudes.size == 0:
        raise ValueError("no amplitudes")
    return float(np.min(np.abs(amplitudes) ** 2) / 10.0 ** (snr_db / 10.0))
