"""RELAX angle-Doppler estimation with an FFT grid kernel and BIC order selection.

The maximum-likelihood criterion for one target against the residual snapshot
X_k is

    L(theta, omega) = |a_r(theta)^H X_k v*(theta, omega)|^2 / (Mr ||v||^2),

maximized per target inside a cyclic coordinate descent over targets. The
coarse stage evaluates L on a grid uniform in electrical angle and Doppler
via zero-padded FFTs over the virtual array and the PRI axis; a bounded
simplex search then refines inside one grid cell.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .model import (
    TWO_PI,
    ArrayConfig,
    CodeMatrix,
    Snapshot,
    Target,
    rx_steering,
    v_vector,
    wrap_pm_pi,
)

TargetEstimate = Target

# Residuals at or below this fraction of the data energy are an exact fit in
# floating point; the BIC sentinel and sweep convergence both key off it.
EXACT_FIT_FLOOR = 1e-20


@dataclass(frozen=True)
class EstimatorConfig:
    angle_bins: int = 1024
    doppler_bins: int = 512
    tolerance: float = 1e-3
    max_targets: int = 25
    fine_iterations: int = 200
    max_sweeps: int = 50

    def __post_init__(self) -> None:
        if self.angle_bins < 2 or self.doppler_bins < 2:
            raise ValueError("grid sizes must be >= 2")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.max_targets < 1 or self.fine_iterations < 1 or self.max_sweeps < 1:
            raise ValueError("iteration limits must be >= 1")


@dataclass(frozen=True)
class Grids:
    """Evaluation grids plus the FFT bin bookkeeping behind them.

    theta_values are the subset of angle bins with |sin theta| < 1, sorted
    ascending; theta_fft_index maps each row of the objective back to its
    FFT output bin. omega bins are all valid and sorted likewise.
    """

    theta_values: np.ndarray
    omega_values: np.ndarray
    theta_fft_index: np.ndarray
    omega_fft_index: np.ndarray
    angle_bins: int
    doppler_bins: int

    @property
    def theta_spacing_bound(self) -> float:
        """Half-width of the fine-search box on the angle axis."""
        return np.pi / self.angle_bins

    @property
    def omega_spacing_bound(self) -> float:
        return np.pi / self.doppler_bins


def make_grids(cfg: ArrayConfig, econf: EstimatorConfig) -> Grids:
    """Angle bins uniform in psi = 2 pi (d_r/lambda) sin theta; Doppler in omega."""
    if econf.angle_bins < cfg.virtual_size:
        raise ValueError("angle_bins must be >= the virtual array size")
    if econf.doppler_bins < cfg.pri_count:
        raise ValueError("doppler_bins must be >= the PRI count")
    psi = TWO_PI * np.fft.fftfreq(econf.angle_bins)
    sin_theta = psi / (TWO_PI * cfg.rx_spacing / cfg.wavelength)
    valid = np.abs(sin_theta) < 1.0 - 1e-12
    valid_idx = np.nonzero(valid)[0]
    thetas = np.arcsin(sin_theta[valid])
    order = np.argsort(thetas)
    omega = TWO_PI * np.fft.fftfreq(econf.doppler_bins)
    omega_order = np.argsort(omega)
    return Grids(
        theta_values=thetas[order],
        omega_values=omega[omega_order],
        theta_fft_index=valid_idx[order],
        omega_fft_index=omega_order,
        angle_bins=econf.angle_bins,
        doppler_bins=econf.doppler_bins,
    )


def _tx_projection_grid(code: CodeMatrix, cfg: ArrayConfig, grids: Grids) -> np.ndarray:
    """Rows c_n^T a_t(theta_l) for every grid angle; shape (L_theta_valid, N)."""
    m = np.arange(cfg.tx_count)
    at = np.exp(
        -1j * TWO_PI * (cfg.tx_spacing / cfg.wavelength) * np.outer(np.sin(grids.theta_values), m)
    )
    return at @ code.entries


def _grid_normalization(code: CodeMatrix, cfg: ArrayConfig, grids: Grids) -> np.ndarray:
    """Mr * ||v(theta_l, .)||^2 per grid angle; omega-independent."""
    proj = _tx_projection_grid(code, cfg, grids)
    return cfg.rx_count * np.sum(np.abs(proj) ** 2, axis=1)


def pointwise_objective(
    x: np.ndarray, theta: float, omega: float, code: CodeMatrix, cfg: ArrayConfig
) -> float:
    """The per-target ML criterion at one off-grid point."""
    v = v_vector(theta, omega, code, cfg)
    nv = float(np.sum(np.abs(v) ** 2))
    if nv <= 0:
        return 0.0
    g = rx_steering(theta, cfg).conj() @ x @ v.conj()
    return float(np.abs(g) ** 2 / (cfg.rx_count * nv))


def _grid_fft(x: np.ndarray, code: CodeMatrix, cfg: ArrayConfig, grids: Grids) -> np.ndarray:
    """FFT evaluation of a_r^H X v* over the full grid.

    Per PRI, the code-weighted snapshot column c_n* kron x_n lives on the
    virtual array; a scatter-add places it at positions gamma*m_t + m_r
    (overlapping elements sum, as the steering phases coincide there). The
    spatial sum with conjugated steering is an inverse FFT, the slow-time
    sum a forward FFT.
    """
    gamma = int(round(cfg.tx_spacing / cfg.rx_spacing))
    positions = (gamma * np.arange(cfg.tx_count)[:, None] + np.arange(cfg.rx_count)).ravel()
    size = positions.max() + 1
    if grids.angle_bins < size:
        raise ValueError("angle_bins smaller than the virtual array extent")
    w = np.einsum("mn,rn->mrn", code.entries.conj(), x).reshape(
        cfg.virtual_size, cfg.pri_count
    )
    z = np.zeros((size, cfg.pri_count), dtype=complex)
    np.add.at(z, positions, w)
    spatial = grids.angle_bins * np.fft.ifft(z, n=grids.angle_bins, axis=0)
    spatial = spatial[grids.theta_fft_index, :]
    g = np.fft.fft(spatial, n=grids.doppler_bins, axis=1)
    return g[:, grids.omega_fft_index]


def _grid_direct(x: np.ndarray, code: CodeMatrix, cfg: ArrayConfig, grids: Grids) -> np.ndarray:
    """Brute-force evaluation of a_r^H X v* on the same grid; the FFT oracle."""
    m = np.arange(cfg.rx_count)
    ar = np.exp(
        -1j * TWO_PI * (cfg.rx_spacing / cfg.wavelength) * np.outer(np.sin(grids.theta_values), m)
    )
    proj = _tx_projection_grid(code, cfg, grids)
    s = (ar.conj() @ x) * proj.conj()
    n = np.arange(cfg.pri_count)
    basis = np.exp(-1j * np.outer(n, grids.omega_values))
    return s @ basis


def grid_objective(
    snapshot: Snapshot,
    code: CodeMatrix,
    cfg: ArrayConfig,
    grids: Grids,
    method: str = "auto",
) -> np.ndarray:
    """The ML criterion on the full grid; rows angles ascending, columns Dopplers.

    method 'fft' needs an integer tx/rx spacing ratio so the virtual array
    lies on a uniform lattice; 'auto' picks it when available. A non-lattice
    geometry with method='fft' falls back to 'direct' with a warning.
    """
    ratio = cfg.tx_spacing / cfg.rx_spacing
    lattice = abs(ratio - round(ratio)) < 1e-9
    if method == "auto":
        method = "fft" if lattice else "direct"
    elif method == "fft" and not lattice:
        warnings.warn("virtual array is not on a uniform lattice; using the direct path")
        method = "direct"
    if method == "fft":
        g = _grid_fft(snapshot.data, code, cfg, grids)
    elif method == "direct":
        g = _grid_direct(snapshot.data, code, cfg, grids)
    else:
        raise ValueError(f"unknown method {method!r}")
    norm = _grid_normalization(code, cfg, grids)
    out = np.abs(g) ** 2
    nonzero = norm > 0
    out[nonzero, :] /= norm[nonzero, None]
    out[~nonzero, :] = 0.0
    return out


def coarse_peak(objective: np.ndarray, grids: Grids) -> tuple[float, float, float]:
    """Grid argmax as (theta, omega, value); ties break at the lowest flat index."""
    flat = int(np.argmax(objective))
    row, col = np.unravel_index(flat, objective.shape)
    return float(grids.theta_values[row]), float(grids.omega_values[col]), float(objective[row, col])


def fine_search(
    snapshot: Snapshot,
    code: CodeMatrix,
    cfg: ArrayConfig,
    coarse: tuple[float, float],
    grids: Grids,
    econf: EstimatorConfig,
) -> tuple[float, float]:
    """Refine a coarse grid peak inside the +-pi/L box with a bounded simplex search.

    Guarded: if the optimizer fails to beat the coarse criterion value, the
    coarse point is returned unchanged.
    """
    theta0, omega0 = coarse
    x = snapshot.data
    ref = pointwise_objective(x, theta0, omega0, code, cfg)
    if ref <= 0:
        return theta0, omega0
    box_t = grids.theta_spacing_bound
    box_w = grids.omega_spacing_bound
    lim = np.pi / 2 - 1e-9
    lo_t = max(theta0 - box_t, -lim)
    hi_t = min(theta0 + box_t, lim)
    # Search in u with (theta, omega) = center + half * sin(u): the whole
    # plane maps into the open box, so the simplex can never be clipped onto
    # a boundary and collapse there.
    center = np.array([(lo_t + hi_t) / 2, omega0])
    half = np.array([(hi_t - lo_t) / 2, box_w])

    def from_u(u: np.ndarray) -> np.ndarray:
        return center + half * np.sin(u)

    def negated(u: np.ndarray) -> float:
        p = from_u(u)
        return -pointwise_objective(x, float(p[0]), float(p[1]), code, cfg) / ref

    u0 = np.arcsin(np.clip((np.array([theta0, omega0]) - center) / half, -1.0, 1.0))
    step = np.pi / 6  # sin(pi/6) = 1/2: simplex edges reach half the box
    simplex = np.array([u0, u0 + [step, 0.0], u0 + [0.0, step]])
    res = minimize(
        negated,
        u0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": 1e-12,
            "fatol": 1e-14,
            "maxiter": econf.fine_iterations,
        },
    )
    theta, omega = (float(p) for p in from_u(res.x))
    if pointwise_objective(x, theta, omega, code, cfg) <= ref:
        return theta0, omega0
    return theta, wrap_pm_pi(omega)


def amplitude_estimate(
    snapshot: Snapshot, theta: float, omega: float, code: CodeMatrix, cfg: ArrayConfig
) -> complex:
    """Least-squares amplitude b = a_r^H X v* / (||a_r||^2 ||v||^2)."""
    v = v_vector(theta, omega, code, cfg)
    nv = float(np.sum(np.abs(v) ** 2))
    if nv <= 1e-300:
        raise ValueError("degenerate steering: ||v|| = 0 at this angle")
    num = rx_steering(theta, cfg).conj() @ snapshot.data @ v.conj()
    return complex(num / (cfg.rx_count * nv))


def _component(t: Target, code: CodeMatrix, cfg: ArrayConfig) -> np.ndarray:
    return np.outer(
        rx_steering(t.azimuth, cfg), t.amplitude * v_vector(t.azimuth, t.doppler, code, cfg)
    )


def residual_snapshot(
    snapshot: Snapshot,
    estimates: list[Target] | tuple[Target, ...],
    omit_index: int | None,
    code: CodeMatrix,
    cfg: ArrayConfig,
) -> Snapshot:
    """X minus every estimated component except omit_index (None subtracts all)."""
    if omit_index is not None and not 0 <= omit_index < len(estimates):
        raise IndexError(f"omit_index {omit_index} out of range")
    x = snapshot.data.copy()
    for i, t in enumerate(estimates):
        if i == omit_index:
            continue
        x -= _component(t, code, cfg)
    return Snapshot(x)


def _estimate_single(
    residual: Snapshot,
    code: CodeMatrix,
    cfg: ArrayConfig,
    grids: Grids,
    econf: EstimatorConfig,
    previous: Target | None,
) -> Target:
    """Grid peak + fine search + amplitude, guarded against leaving a better point.

    When re-estimating an existing target, the update is kept only if the
    criterion at the new point beats the criterion at the old point; either
    way the amplitude is refreshed against the current residual, so the
    global cost cannot increase.
    """
    obj = grid_objective(residual, code, cfg, grids)
    theta_c, omega_c, _ = coarse_peak(obj, grids)
    theta, omega = fine_search(residual, code, cfg, (theta_c, omega_c), grids, econf)
    if previous is not None:
        new_val = pointwise_objective(residual.data, theta, omega, code, cfg)
        old_val = pointwise_objective(residual.data, previous.azimuth, previous.doppler, code, cfg)
        if old_val > new_val:
            theta, omega = previous.azimuth, previous.doppler
    b = amplitude_estimate(residual, theta, omega, code, cfg)
    return Target(theta, omega, b)


@dataclass
class StepDiagnostics:
    sweeps: int
    costs: list[float]
    converged: bool


def relax_step(
    snapshot: Snapshot,
    estimates: list[Target] | tuple[Target, ...],
    code: CodeMatrix,
    cfg: ArrayConfig,
    econf: EstimatorConfig,
    grids: Grids | None = None,
) -> tuple[list[Target], StepDiagnostics]:
    """Grow the model by one target and cyclically re-refine all of them.

    Takes the k-1 estimates of the previous order and returns k. Sweeps run
    newest target first, then the older ones, until the relative change of
    the residual cost between consecutive sweeps drops below the tolerance.
    Hitting the sweep cap returns the best-so-far with converged=False.
    """
    if grids is None:
        grids = make_grids(cfg, econf)
    x = snapshot.data
    current: list[Target | None] = list(estimates) + [None]
    k = len(current)
    components = [np.zeros_like(x) if t is None else _component(t, code, cfg) for t in current]
    total = np.sum(components, axis=0)
    energy = float(np.sum(np.abs(x) ** 2))
    floor = EXACT_FIT_FLOOR * energy
    costs: list[float] = []
    converged = False
    sweep_order = [k - 1] + list(range(k - 1))
    sweeps = 0
    prev_cost = None
    for sweeps in range(1, econf.max_sweeps + 1):
        for idx in sweep_order:
            residual = Snapshot(x - total + components[idx])
            updated = _estimate_single(residual, code, cfg, grids, econf, current[idx])
            current[idx] = updated
            new_comp = _component(updated, code, cfg)
            total += new_comp - components[idx]
            components[idx] = new_comp
        cost = float(np.sum(np.abs(x - total) ** 2))
        costs.append(cost)
        if cost <= floor:
            converged = True
            break
        if prev_cost is not None and abs(prev_cost - cost) <= econf.tolerance * prev_cost:
            converged = True
            break
        if k == 1:
            # a second sweep would redo the identical deterministic update
            converged = True
            break
        prev_cost = cost
    final = [t for t in current if t is not None]
    return final, StepDiagnostics(sweeps=sweeps, costs=costs, converged=converged)


def bic_score(snapshot: Snapshot, estimates: list[Target] | tuple[Target, ...], code: CodeMatrix, cfg: ArrayConfig) -> float:
    """BIC(K) = 2 N Mr ln(RSS/(N Mr)) + 4 K ln(2 N Mr).

    4K real parameters, 2 N Mr real observations, noise power concentrated
    out. An exact fit (RSS at the floating-point floor) returns -inf.
    """
    n_obs = cfg.pri_count * cfg.rx_count
    rss = float(
        np.sum(np.abs(residual_snapshot(snapshot, estimates, None, code, cfg).data) ** 2)
    )
    energy = float(np.sum(np.abs(snapshot.data) ** 2))
    if rss <= EXACT_FIT_FLOOR * max(energy, 1e-300):
        return -np.inf
    return float(2 * n_obs * np.log(rss / n_obs) + 4 * len(estimates) * np.log(2 * n_obs))


@dataclass
class RelaxResult:
    estimates: list[Target]
    selected_order: int
    bic_values: list[float]
    residual_norms: list[float]
    sweep_counts: list[int]
    converged: bool

    @property
    def orders_tried(self) -> list[int]:
        return list(range(len(self.bic_values)))


def relax_estimate(
    snapshot: Snapshot,
    code: CodeMatrix,
    cfg: ArrayConfig,
    econf: EstimatorConfig,
    fixed_order: int | None = None,
) -> RelaxResult:
    """Full RELAX: grow the order step by step, score each with BIC, pick the best.

    The scan starts at the empty model and stops at the first order whose
    BIC does not improve on its predecessor (or at max_targets); the
    returned estimates belong to the BIC-minimizing order, first minimum on
    ties. fixed_order runs exactly that many steps and skips selection.
    """
    grids = make_grids(cfg, econf)
    estimates: list[Target] = []
    per_order: list[list[Target]] = [[]]
    bics = [bic_score(snapshot, [], code, cfg)]
    residuals = [float(np.sum(np.abs(snapshot.data) ** 2))]
    sweep_counts = [0]
    all_converged = True
    max_order = fixed_order if fixed_order is not None else econf.max_targets
    if fixed_order is not None and fixed_order > econf.max_targets:
        raise ValueError("fixed_order exceeds max_targets")
    for k in range(1, max_order + 1):
        estimates, diag = relax_step(snapshot, estimates, code, cfg, econf, grids)
        all_converged = all_converged and diag.converged
        per_order.append(list(estimates))
        bics.append(bic_score(snapshot, estimates, code, cfg))
        residuals.append(diag.costs[-1] if diag.costs else residuals[-1])
        sweep_counts.append(diag.sweeps)
        if fixed_order is None and bics[k] >= bics[k - 1]:
            break
    if fixed_order is not None:
        selected = fixed_order
    else:
        selected = int(np.argmin(bics))
    return RelaxResult(
        estimates=per_order[selected],
        selected_order=selected,
        bic_values=bics,
        residual_norms=residuals,
        sweep_counts=sweep_counts,
        converged=all_converged,
    )
