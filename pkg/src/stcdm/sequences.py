"""Slow-time code generators: random unimodular, Zadoff-Chu, and P4 CAZAC rows."""

from __future__ import annotations

from math import gcd

import numpy as np

from .model import TWO_PI, CodeMatrix


def random_code(tx_count: int, pri_count: int, seed: int | np.random.Generator | None = None) -> CodeMatrix:
    """Phases i.i.d. uniform on [0, 2 pi); deterministic under a fixed seed."""
    if tx_count < 1 or pri_count < 1:
        raise ValueError("tx_count and pri_count must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    phases = rng.uniform(0.0, TWO_PI, size=(tx_count, pri_count))
    return CodeMatrix(np.exp(1j * phases))


def default_zc_roots(tx_count: int, pri_count: int) -> list[int]:
    """Smallest tx_count positive integers coprime with the sequence length."""
    roots: list[int] = []
    u = 1
    while len(roots) < tx_count:
        if gcd(u, pri_count) == 1:
            roots.append(u)
        u += 1
    return roots


def zadoff_chu_row(root: int, length: int) -> np.ndarray:
    """One Zadoff-Chu sequence; root must be coprime with the length."""
    if gcd(root, length) != 1:
        raise ValueError(f"root {root} is not coprime with length {length}")
    n = np.arange(length)
    if length % 2:
        phase = -np.pi * root * n * (n + 1) / length
    else:
        phase = -np.pi * root * n * n / length
    return np.exp(1j * phase)


def zadoff_chu_code(tx_count: int, pri_count: int, roots: list[int] | None = None) -> CodeMatrix:
    """Row m is the ZC sequence with root roots[m]; defaults to the smallest coprime roots."""
    if roots is None:
        roots = default_zc_roots(tx_count, pri_count)
    if len(roots) != tx_count:
        raise ValueError("need exactly one root per transmit antenna")
    return CodeMatrix(np.stack([zadoff_chu_row(u, pri_count) for u in roots]))


def p_sequence_row(length: int, shift: int = 0) -> np.ndarray:
    """P4 polyphase row phi(n) = pi n (n - N) / N, cyclically shifted."""
    if length < 2:
        raise ValueError("length must be >= 2")
    n = np.arange(length)
    row = np.exp(1j * np.pi * n * (n - length) / length)
    return np.roll(row, -int(shift) % length)


def p_sequence_code(tx_count: int, pri_count: int, shifts: list[int] | None = None) -> CodeMatrix:
    """Row m is a P4 row shifted by shifts[m]; default shifts floor(m N / Mt)."""
    if shifts is None:
        shifts = [m * pri_count // tx_count for m in range(tx_count)]
    if len(shifts) != tx_count:
        raise ValueError("need exactly one shift per transmit antenna")
    return CodeMatrix(np.stack([p_sequence_row(pri_count, s) for s in shifts]))


def periodic_autocorrelation(row: np.ndarray) -> np.ndarray:
    """r(k) = sum_n c[n] conj(c[(n+k) mod N]) for k = 0..N-1."""
    row = np.asarray(row, dtype=complex)
    spec = np.abs(np.fft.fft(row)) ** 2
    # ifft of the power spectrum gives the k -> -k correlation, i.e. conj(r).
    return np.conj(np.fft.ifft(spec))


def max_autocorrelation_sidelobe(code: CodeMatrix) -> float:
    """Largest off-zero-lag periodic autocorrelation magnitude over all rows."""
    worst = 0.0
    for row in code.entries:
        r = periodic_autocorrelation(row)
        if len(r) > 1:
            worst = max(worst, float(np.max(np.abs(r[1:]))))
    return worst


def make_code(kind: str, tx_count: int, pri_count: int, seed: int | None = None) -> CodeMatrix:
    """Dispatch on a code family name used by scenario files and the CLI."""
    if kind == "random":
        return random_code(tx_count, pri_count, seed)
    if kind == "zadoff_chu":
        return zadoff_chu_code(tx_count, pri_count)
    if kind == "p_sequence":
        return p_sequence_code(tx_count, pri_count)
    raise ValueError(f"unknown code family {kind!r}")
