"""Code-design tests: gram map dual route, relaxation bounds, extraction."""

import numpy as np
import pytest

from stcdm import (
    ArrayConfig,
    CodeMatrix,
    SdpSolution,
    Target,
    TargetScene,
    assemble_fim,
    build_sdp,
    code_grams,
    extract_code,
    fim_from_grams,
    optimize_code,
    solve_sdp,
    trace_crb,
)
from stcdm.codeopt import rounding_candidates
from stcdm.fim import angle_doppler_indices
from stcdm.sequences import random_code

CFG = ArrayConfig(tx_count=3, rx_count=3, tx_spacing=1.5, rx_spacing=0.5, wavelength=1.0, pri_count=8)
SCENE = TargetScene(
    targets=(Target(0.3, 0.5, 1.0), Target(-0.4, -1.0, 0.8 + 0.2j)),
    noise_power=0.5,
)
INITIAL = random_code(3, 8, seed=4)


@pytest.fixture(scope="module")
def solved():
    built = build_sdp(SCENE, CFG)
    return solve_sdp(built, solver="clarabel")


@pytest.fixture(scope="module")
def designed():
    return optimize_code(SCENE, CFG, INITIAL, solver="clarabel")


class TestCodeGrams:
    def test_structure(self):
        grams = code_grams(INITIAL)
        assert grams.shape == (8, 3, 3)
        for g in grams:
            np.testing.assert_allclose(g, g.conj().T, atol=1e-14)
            np.testing.assert_allclose(np.diag(g).real, 1.0, atol=1e-14)
            ev = np.linalg.eigvalsh(g)
            assert ev[-1] == pytest.approx(3.0)  # rank one: single eigenvalue Mt
            assert np.all(ev[:-1] < 1e-12)

    def test_global_column_phase_invariance(self):
        shifted = INITIAL.entries.copy()
        shifted[:, 2] *= np.exp(0.7j)
        np.testing.assert_allclose(
            code_grams(CodeMatrix(shifted)), code_grams(INITIAL), atol=1e-14
        )


class TestGramFimMap:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_assemble_fim(self, seed):
        code = random_code(CFG.tx_count, CFG.pri_count, seed=seed)
        direct = assemble_fim(SCENE, code, CFG)
        mapped = fim_from_grams(SCENE, CFG, code_grams(code))
        rel = np.linalg.norm(direct.entries - mapped.entries) / np.linalg.norm(direct.entries)
        assert rel < 1e-8

    def test_single_tx_code_independent(self):
        cfg = ArrayConfig(1, 3, 0.5, 0.5, 1.0, 8)
        scene = TargetScene(targets=(Target(0.2, 0.4, 1.0),), noise_power=1.0)
        f1 = assemble_fim(scene, random_code(1, 8, seed=0), cfg)
        f2 = assemble_fim(scene, random_code(1, 8, seed=1), cfg)
        np.testing.assert_allclose(f1.entries, f2.entries, atol=1e-10)

    def test_zero_grams_zero_fim(self):
        zeros = np.zeros((CFG.pri_count, CFG.tx_count, CFG.tx_count))
        f = fim_from_grams(SCENE, CFG, zeros)
        np.testing.assert_array_equal(f.entries, 0.0)


class TestRelaxationBounds:
    def test_lower_bounds_random_codes(self, solved):
        # The relaxed optimum under-runs the exact tr CRB of every feasible code.
        for seed in range(100):
            code = random_code(CFG.tx_count, CFG.pri_count, seed=1000 + seed)
            tr = trace_crb(assemble_fim(SCENE, code, CFG))
            assert solved.relaxed_objective <= tr + 1e-9

    def test_sandwich_with_extraction(self, solved):
        code, fallback = extract_code(solved)
        assert not fallback
        tr = trace_crb(assemble_fim(SCENE, code, CFG))
        assert solved.relaxed_objective <= tr + 1e-9

    def test_gram_constraints_hold(self, solved):
        for g in solved.grams:
            np.testing.assert_allclose(np.diag(g).real, 1.0, atol=1e-7)
            assert np.linalg.eigvalsh(g)[0] > -1e-7

    def test_deterministic_resolve(self, solved):
        again = solve_sdp(build_sdp(SCENE, CFG), solver="clarabel")
        assert again.relaxed_objective == pytest.approx(solved.relaxed_objective, rel=1e-9)
        np.testing.assert_allclose(again.grams, solved.grams, atol=1e-7)

    def test_noise_scaling_of_objective(self, solved):
        doubled = TargetScene(SCENE.targets, 2.0 * SCENE.noise_power)
        sol2 = solve_sdp(build_sdp(doubled, CFG), solver="clarabel")
        assert sol2.relaxed_objective == pytest.approx(2.0 * solved.relaxed_objective, rel=1e-7)

    def test_selection_restricts_objective(self):
        sel = angle_doppler_indices(SCENE.size)
        sol = solve_sdp(build_sdp(SCENE, CFG, selection=sel), solver="clarabel")
        init_sel = trace_crb(assemble_fim(SCENE, INITIAL, CFG), sel)
        assert sol.relaxed_objective <= init_sel + 1e-9

    def test_unknown_solver(self, solved):
        with pytest.raises(ValueError):
            solve_sdp(build_sdp(SCENE, CFG), solver="sedumi")

    def test_empty_scene_rejected(self):
        with pytest.raises(ValueError):
            build_sdp(TargetScene(targets=(), noise_power=1.0), CFG)


class TestExtraction:
    def test_rank_one_recovery(self):
        code = random_code(3, 4, seed=9)
        sol = SdpSolution(
            grams=code_grams(code),
            relaxed_objective=0.0,
            status="optimal",
            solver="test",
            iterations=None,
            rank_profile=np.ones((4, 3)),
        )
        recovered, fallback = extract_code(sol)
        assert not fallback
        # agreement up to one global phase per column
        ratio = recovered.entries / code.entries
        np.testing.assert_allclose(np.abs(ratio), 1.0, atol=1e-12)
        np.testing.assert_allclose(ratio, ratio[0:1, :].repeat(3, axis=0), atol=1e-10)

    def test_degenerate_entry_fallback(self):
        grams = np.stack([np.eye(3, dtype=complex)])
        sol = SdpSolution(
            grams=grams,
            relaxed_objective=0.0,
            status="optimal",
            solver="test",
            iterations=None,
            rank_profile=np.ones((1, 3)),
        )
        code, fallback = extract_code(sol)
        assert fallback
        np.testing.assert_allclose(np.abs(code.entries), 1.0, atol=1e-12)

    def test_rank_one_fraction(self):
        profile = np.array([[0.0, 0.0, 3.0], [0.5, 0.5, 1.0]])
        sol = SdpSolution(
            grams=np.zeros((2, 3, 3)),
            relaxed_objective=0.0,
            status="optimal",
            solver="test",
            iterations=None,
            rank_profile=profile,
        )
        assert sol.rank_one_fraction == pytest.approx(0.5)

    def test_rounding_candidates(self, solved):
        rng = np.random.default_rng(3)
        cands = rounding_candidates(solved, 5, rng)
        assert len(cands) == 5
        for c in cands:
            np.testing.assert_allclose(np.abs(c.entries), 1.0, atol=1e-12)
        again = rounding_candidates(solved, 5, np.random.default_rng(3))
        np.testing.assert_allclose(cands[2].entries, again[2].entries, atol=0)


class TestOptimizeCode:
    def test_never_worse_than_initial(self, designed):
        code, report = designed
        assert report.final_trace <= report.initial_trace + 1e-9
        assert report.relaxed_objective <= report.final_trace + 1e-9
        np.testing.assert_allclose(np.abs(code.entries), 1.0, atol=1e-12)

    def test_report_coherent(self, designed):
        code, report = designed
        assert report.solver == "clarabel"
        assert report.solver_status in ("optimal", "optimal_inaccurate")
        assert 0 < report.rank_one_fraction <= 1.0
        assert report.rank_profile.shape == (CFG.pri_count, CFG.tx_count)
        if not report.used_rounding:
            assert report.final_trace == pytest.approx(report.eigenvector_trace)
        assert not report.rounding_failed or report.final_trace == pytest.approx(
            report.initial_trace
        )

    def test_improves_on_random_initial(self, designed):
        _, report = designed
        # At this scale the relaxation is strong; require a real improvement.
        assert report.final_trace < 0.9 * report.initial_trace

    def test_single_tx_degenerate(self):
        cfg = ArrayConfig(1, 3, 0.5, 0.5, 1.0, 8)
        scene = TargetScene(targets=(Target(0.2, 0.4, 1.0),), noise_power=1.0)
        init = random_code(1, 8, seed=2)
        code, report = optimize_code(scene, cfg, init, solver="clarabel")
        assert report.final_trace == pytest.approx(report.initial_trace, rel=1e-6)
        assert report.relaxed_objective == pytest.approx(report.initial_trace, rel=1e-5)

    def test_selection_drives_selected_trace(self):
        sel = angle_doppler_indices(SCENE.size)
        code, report = optimize_code(SCENE, CFG, INITIAL, selection=sel, solver="clarabel")
        init_sel = trace_crb(assemble_fim(SCENE, INITIAL, CFG), sel)
        assert report.initial_trace == pytest.approx(init_sel)
        assert report.final_trace <= init_sel + 1e-9
