"""CRB-driven slow-time code design via semidefinite relaxation.

The Fisher matrix is linear in the per-PRI code grams C~_n = conj(c_n) c_n^T,
so minimizing tr(CRB) relaxes to a semidefinite program once the rank-1 and
unit-modulus constraints are dropped: minimize tr(T) subject to the Schur
epigraph [[F({C~_n}), E], [E^T, T]] >= 0 with unit-diagonal PSD grams. A
unimodular code is then recovered from the principal eigenvectors, with a
randomized-rounding fallback scored by the exact CRB trace.
"""

from __future__ import annotations

from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .fim import FimMatrix, _blocks_from_grams, assemble_fim
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
from .sequences import zadoff_chu_code

# Below this many real gram unknowns an interior-point solve is quick and
# tight; above it the dense CRB map makes its KKT factorizations explode,
# while the first-order solver only ever multiplies by the map.
SOLVER_AUTO_LIMIT = 1500
SCS_EPS = 5e-7
SCS_MAX_ITERS = 100000
# gram dofs x LMI order^2; above this the splitting solver switches to its
# matrix-free linear system and a looser tolerance to stay inside practical
# wall-clock budgets (override through scs_options).
SCS_LARGE_COST = 2e6
SCS_EPS_LARGE = 1e-5
SCS_MAX_ITERS_LARGE = 25000


def code_grams(code: CodeMatrix) -> np.ndarray:
    """Per-PRI grams C~_n = conj(c_n) c_n^T, stacked to shape (N, Mt, Mt)."""
    c = code.entries
    return np.einsum("mn,pn->nmp", c.conj(), c)


def _anchor_matrices(scene: TargetScene, cfg: ArrayConfig):
    thetas = scene.azimuths
    at = np.stack([tx_steering(t, cfg) for t in thetas], axis=1)
    dat = np.stack([tx_steering_deriv(t, cfg) for t in thetas], axis=1)
    ar = np.stack([rx_steering(t, cfg) for t in thetas], axis=1)
    dar = np.stack([rx_steering_deriv(t, cfg) for t in thetas], axis=1)
    dop = np.stack([doppler_steering(w, cfg.pri_count) for w in scene.dopplers], axis=1)
    ddop = 1j * np.arange(cfg.pri_count)[:, None] * dop
    ar_gram = {
        "aa": ar.conj().T @ ar,
        "da": dar.conj().T @ ar,
        "ad": ar.conj().T @ dar,
        "dd": dar.conj().T @ dar,
    }
    return at, dat, ar_gram, dop, ddop


def fim_from_grams(scene: TargetScene, cfg: ArrayConfig, grams: np.ndarray) -> FimMatrix:
    """Evaluate the gram -> FIM linear map numerically.

    Every slow-time Gram product (X^H Y)[k,l] factors as
    sum_n conj(fx[n,k]) fy[n,l] (Px^H C~_n Py)[k,l] with P in {A_t, dA_t}
    and f in {D, dD}; the receive-array and amplitude factors are
    code-independent. Agreement with assemble_fim on the grams of an actual
    code is the map's correctness test.
    """
    if scene.noise_power <= 0:
        raise ValueError("FIM requires sigma^2 > 0")
    at, dat, ar_gram, dop, ddop = _anchor_matrices(scene, cfg)

    def sandwich(px: np.ndarray, py: np.ndarray) -> np.ndarray:
        return np.einsum("mk,nmp,pl->nkl", px.conj(), grams, py)

    s_aa = sandwich(at, at)
    s_da = sandwich(dat, at)
    s_ad = np.conj(np.swapaxes(s_da, 1, 2))
    s_dd = sandwich(dat, dat)

    def weight(fx: np.ndarray, fy: np.ndarray, s: np.ndarray) -> np.ndarray:
        return np.einsum("nk,nl,nkl->kl", fx.conj(), fy, s)

    v_gram = {
        "vv": weight(dop, dop, s_aa),
        "vt": weight(dop, dop, s_ad),
        "tv": weight(dop, dop, s_da),
        "tt": weight(dop, dop, s_dd),
        "vw": weight(dop, ddop, s_aa),
        "tw": weight(dop, ddop, s_da),
        "wv": weight(ddop, dop, s_aa),
        "ww": weight(ddop, ddop, s_aa),
    }
    f = (2.0 / scene.noise_power) * np.real(
        _blocks_from_grams(ar_gram, v_gram, scene.amplitudes)
    )
    return FimMatrix(0.5 * (f + f.T), scene.noise_power)


@dataclass
class SdpProblem:
    """A built (not yet solved) relaxation plus the handles needed afterwards."""

    problem: cp.Problem
    gram_vars: list[cp.Variable]
    selection: np.ndarray | None
    anchor_noise: float
    lmi_order: int


def _fim_expression(scene: TargetScene, cfg: ArrayConfig, gram_vars: list) -> cp.Expression:
    """The sigma^2 = 2 Fisher matrix as one cvxpy expression in the gram variables.

    All six slow-time Gram products come from a single stacked quadratic
    form sum_n Y_n^H C~_n Y_n with Y_n = [A_t diag(d_n), dA_t diag(d_n),
    A_t diag(dd_n)], sliced afterwards; this keeps the expression tree small
    enough to canonicalize at paper scale.
    """
    k = scene.size
    at, dat, ar_gram, dop, ddop = _anchor_matrices(scene, cfg)
    s = None
    for n in range(cfg.pri_count):
        y = np.concatenate(
            [at * dop[n][None, :], dat * dop[n][None, :], at * ddop[n][None, :]], axis=1
        )
        term = cp.conj(y).T @ gram_vars[n] @ y
        s = term if s is None else s + term
    vv = s[0:k, 0:k]
    vt = s[0:k, k : 2 * k]
    tv = s[k : 2 * k, 0:k]
    tt = s[k : 2 * k, k : 2 * k]
    vw = s[0:k, 2 * k : 3 * k]
    tw = s[k : 2 * k, 2 * k : 3 * k]
    wv = s[2 * k : 3 * k, 0:k]
    ww = s[2 * k : 3 * k, 2 * k : 3 * k]
    b = scene.amplitudes
    bo = np.outer(b.conj(), b)
    bc = b.conj()[:, None]
    mul = cp.multiply
    f11 = (
        mul(ar_gram["dd"] * bo, vv)
        + mul(ar_gram["da"] * bo, vt)
        + mul(ar_gram["ad"] * bo, tv)
        + mul(ar_gram["aa"] * bo, tt)
    )
    f12 = mul(ar_gram["da"] * bo, vw) + mul(ar_gram["aa"] * bo, tw)
    f13 = mul(ar_gram["da"] * bc, vv) + mul(ar_gram["aa"] * bc, tv)
    f22 = mul(ar_gram["aa"] * bo, ww)
    f23 = mul(ar_gram["aa"] * bc, wv)
    f33 = mul(ar_gram["aa"], vv)
    f_complex = cp.bmat(
        [
            [f11, f12, f13, 1j * f13],
            [f12.T, f22, f23, 1j * f23],
            [f13.T, f23.T, f33, 1j * f33],
            [1j * f13.T, 1j * f23.T, 1j * f33.T, f33],
        ]
    )
    return cp.real(f_complex)


def build_sdp(
    scene: TargetScene,
    cfg: ArrayConfig,
    selection: np.ndarray | list[int] | None = None,
    reference: CodeMatrix | None = None,
) -> SdpProblem:
    """Epigraph relaxation: minimize tr T s.t. [[F({C~_n}), E], [E^T, T]] >= 0.

    The problem the solver sees is the exact diagonal congruence
    [[D F D, D E G], [G E^T D, G T G]] with D = diag(F_0)^{-1/2} and
    G = diag(CRB_0)^{-1/2} taken from a reference unimodular code (default
    Zadoff-Chu): F entries spread over ~N^2 in magnitude and first-order
    solvers stall on the raw form, while the congruent form is O(1)
    throughout. The feasible gram set and the optimal value are unchanged;
    the trace objective turns into the weighted trace sum_i CRB_0(ii) T~(ii).
    E restricts the trace to the selected parameter indices; default all 4K.
    """
    if scene.size < 1:
        raise ValueError("anchor scene has no targets")
    mt, n = cfg.tx_count, cfg.pri_count
    p4 = 4 * scene.size
    if reference is None:
        reference = zadoff_chu_code(mt, n)
    ref_scene = TargetScene(scene.targets, 2.0)
    f0 = assemble_fim(ref_scene, reference, cfg)
    crb0_diag = f0.crb().diagonal()  # raises IdentifiabilityError when singular
    sel = None if selection is None else np.asarray(selection, dtype=int)
    e = np.eye(p4) if sel is None else np.eye(p4)[:, sel]
    d = 1.0 / np.sqrt(np.diag(f0.entries))
    weights = crb0_diag if sel is None else crb0_diag[sel]
    g_scale = 1.0 / np.sqrt(weights)
    gram_vars = [cp.Variable((mt, mt), hermitian=True, name=f"gram_{i}") for i in range(n)]
    f_expr = _fim_expression(scene, cfg, gram_vars)
    t_var = cp.Variable((e.shape[1], e.shape[1]), symmetric=True)
    lmi = cp.bmat(
        [
            [cp.multiply(np.outer(d, d), f_expr), d[:, None] * e * g_scale[None, :]],
            [(d[:, None] * e * g_scale[None, :]).T, t_var],
        ]
    )
    constraints = [lmi >> 0]
    for g in gram_vars:
        constraints.append(g >> 0)
        constraints.append(cp.diag(g) == 1)
    problem = cp.Problem(cp.Minimize(cp.sum(cp.multiply(weights, cp.diag(t_var)))), constraints)
    return SdpProblem(
        problem=problem,
        gram_vars=gram_vars,
        selection=sel,
        anchor_noise=scene.noise_power,
        lmi_order=p4 + e.shape[1],
    )


@dataclass(frozen=True)
class SdpSolution:
    grams: np.ndarray
    relaxed_objective: float
    status: str
    solver: str
    iterations: int | None
    rank_profile: np.ndarray

    @property
    def rank_one_fraction(self) -> float:
        """min over PRIs of (largest eigenvalue / eigenvalue sum); 1 = exact rank 1."""
        tops = self.rank_profile[:, -1]
        sums = np.sum(self.rank_profile, axis=1)
        return float(np.min(tops / np.maximum(sums, 1e-300)))


class SolverFailure(Exception):
    pass


def solve_sdp(
    built: SdpProblem,
    solver: str = "auto",
    verbose: bool = False,
    scs_options: dict | None = None,
) -> SdpSolution:
    """Solve the relaxation; objective is rescaled to the anchor's sigma^2.

    'auto' uses the interior-point solver on small problems and the
    first-order splitting solver above SOLVER_AUTO_LIMIT gram unknowns.
    For the first-order solver the reported objective takes the smaller of
    the primal and dual values, since its primal value at finite tolerance
    can sit a hair above the true relaxation optimum.
    """
    n_dof = sum(int(np.prod(g.shape)) for g in built.gram_vars)
    if solver == "auto":
        solver = "clarabel" if n_dof <= SOLVER_AUTO_LIMIT else "scs"
    if solver == "clarabel":
        built.problem.solve(solver=cp.CLARABEL, verbose=verbose)
        objective = built.problem.value
    elif solver == "scs":
        if n_dof * built.lmi_order**2 > SCS_LARGE_COST:
            opts = dict(eps=SCS_EPS_LARGE, max_iters=SCS_MAX_ITERS_LARGE, use_indirect=True)
        else:
            opts = dict(eps=SCS_EPS, max_iters=SCS_MAX_ITERS)
        if scs_options:
            opts.update(scs_options)
        built.problem.solve(solver=cp.SCS, verbose=verbose, **opts)
        objective = built.problem.value
        extra = getattr(built.problem.solver_stats, "extra_stats", None)
        if isinstance(extra, dict):
            info = extra.get("info", extra)
            pobj = info.get("pobj")
            dobj = info.get("dobj")
            if pobj is not None and dobj is not None:
                objective = min(float(pobj), float(dobj))
    else:
        raise ValueError(f"unknown solver {solver!r}")
    status = built.problem.status
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or objective is None:
        raise SolverFailure(f"SDP solve failed with status {status}")
    grams = []
    for g in built.gram_vars:
        val = np.asarray(g.value, dtype=complex)
        val = 0.5 * (val + val.conj().T)
        d = np.sqrt(np.clip(np.real(np.diag(val)), 1e-12, None))
        grams.append(val / np.outer(d, d))
    grams = np.stack(grams)
    profile = np.stack([np.linalg.eigvalsh(g) for g in grams])
    # the LMI lives at sigma^2 = 2; restore the anchor's noise level
    relaxed = float(objective) * (built.anchor_noise / 2.0)
    stats = built.problem.solver_stats
    iterations = getattr(stats, "num_iters", None)
    return SdpSolution(
        grams=grams,
        relaxed_objective=relaxed,
        status=status,
        solver=solver,
        iterations=None if iterations is None else int(iterations),
        rank_profile=profile,
    )


def extract_code(solution: SdpSolution) -> tuple[CodeMatrix, bool]:
    """Principal eigenvector of each conjugated gram, projected to unit modulus.

    conj(C~_n) = c_n conj(c_n)^T for an exact rank-1 gram, so its principal
    eigenvector is c_n up to a global column phase. Returns the code and a
    flag marking any entry that needed the zero-magnitude fallback.
    """
    n, mt, _ = solution.grams.shape
    entries = np.zeros((mt, n), dtype=complex)
    fallback = False
    for i in range(n):
        _, vecs = np.linalg.eigh(np.conj(solution.grams[i]))
        lead = vecs[:, -1]
        mags = np.abs(lead)
        degenerate = mags < 1e-12
        if degenerate.any():
            fallback = True
            lead = np.where(degenerate, 1.0, lead)
            mags = np.abs(lead)
        entries[:, i] = lead / mags
    return CodeMatrix(entries), fallback


def rounding_candidates(
    solution: SdpSolution, draws: int, rng: np.random.Generator
) -> list[CodeMatrix]:
    """Gaussian samples y ~ CN(0, C~_n) per PRI, projected entrywise to unit modulus."""
    n, mt, _ = solution.grams.shape
    factors = []
    for i in range(n):
        w, u = np.linalg.eigh(solution.grams[i])
        factors.append(u * np.sqrt(np.clip(w, 0.0, None)))
    out = []
    for _ in range(draws):
        entries = np.zeros((mt, n), dtype=complex)
        for i in range(n):
            xi = (rng.standard_normal(mt) + 1j * rng.standard_normal(mt)) / np.sqrt(2.0)
            y = factors[i] @ xi
            mags = np.abs(y)
            y = np.where(mags < 1e-12, 1.0, y)
            # y approximates conj(c_n), so conjugate back
            entries[:, i] = np.conj(y / np.abs(y))
        out.append(CodeMatrix(entries))
    return out


@dataclass(frozen=True)
class CodeDesignReport:
    initial_trace: float
    eigenvector_trace: float
    final_trace: float
    relaxed_objective: float
    solver: str
    solver_status: str
    iterations: int | None
    rank_one_fraction: float
    rank_profile: np.ndarray
    used_rounding: bool
    rounding_failed: bool
    extraction_fallback: bool


def optimize_code(
    scene: TargetScene,
    cfg: ArrayConfig,
    initial: CodeMatrix,
    selection: np.ndarray | list[int] | None = None,
    solver: str = "auto",
    rounding_draws: int = 100,
    seed: int = 0,
    verbose: bool = False,
    scs_options: dict | None = None,
) -> tuple[CodeMatrix, CodeDesignReport]:
    """Full design pass: relax, extract, and fall back to rounding if needed.

    The scene plays the anchor role: in the intended workflow its parameters
    are RELAX estimates from data collected under `initial`. The returned
    code is never silently worse than `initial`: if both the eigenvector
    code and every rounding draw lose to it, the initial code is returned
    with rounding_failed=True in the report.
    """
    sel = None if selection is None else np.asarray(selection, dtype=int)
    f_init = assemble_fim(scene, initial, cfg)
    initial_trace = f_init.crb().trace(sel)
    built = build_sdp(scene, cfg, selection=sel, reference=initial)
    solution = solve_sdp(built, solver=solver, verbose=verbose, scs_options=scs_options)

    def scored(code: CodeMatrix) -> float:
        return assemble_fim(scene, code, cfg).crb().trace(sel)

    eig_code, extraction_fallback = extract_code(solution)
    eig_trace = scored(eig_code)
    final_code, final_trace = eig_code, eig_trace
    used_rounding = False
    rounding_failed = False
    if eig_trace > initial_trace and rounding_draws > 0:
        used_rounding = True
        rng = np.random.default_rng(seed)
        for cand in rounding_candidates(solution, rounding_draws, rng):
            tr = scored(cand)
            if tr < final_trace:
                final_code, final_trace = cand, tr
        if final_trace > initial_trace:
            rounding_failed = True
            final_code, final_trace = initial, initial_trace
    elif eig_trace > initial_trace:
        rounding_failed = True
        final_code, final_trace = initial, initial_trace
    report = CodeDesignReport(
        initial_trace=float(initial_trace),
        eigenvector_trace=float(eig_trace),
        final_trace=float(final_trace),
        relaxed_objective=float(solution.relaxed_objective),
        solver=solution.solver,
        solver_status=solution.status,
        iterations=solution.iterations,
        rank_one_fraction=solution.rank_one_fraction,
        rank_profile=solution.rank_profile,
        used_rounding=used_rounding,
        rounding_failed=rounding_failed,
        extraction_fallback=extraction_fallback,
    )
    return final_code, report
