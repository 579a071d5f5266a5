"""Slow-time code-division MIMO radar processing.

Snapshot simulation, exact Fisher-information/CRB evaluation, CRB-driven
slow-time code design via semidefinite relaxation, FFT-accelerated RELAX
angle-Doppler estimation, matched-filter imaging, and Monte-Carlo RMSE/RCRB
experiment tooling.
"""

from .codeopt import (
    CodeDesignReport,
    SdpSolution,
    SolverFailure,
    build_sdp,
    code_grams,
    extract_code,
    fim_from_grams,
    optimize_code,
    solve_sdp,
)
from .docio import (
    array_doc,
    code_doc,
    doc_array,
    doc_code,
    doc_scene,
    dump_json,
    load_json,
    read_snapshot_csv,
    scene_doc,
    write_matrix_csv,
    write_mc_csv,
    write_snapshot_csv,
)
from .fim import (
    CrbMatrix,
    FimMatrix,
    IdentifiabilityError,
    angle_doppler_indices,
    assemble_fim,
    crb,
    fim_numeric_oracle,
    fim_with_unknown_noise,
    model_matrices,
    trace_crb,
)
from .imaging import AngleDopplerImage, mf_image
from .model import (
    ArrayConfig,
    CodeMatrix,
    Snapshot,
    Target,
    TargetScene,
    doppler_steering,
    noise_power_for_snr,
    rx_steering,
    scene_snr,
    steering_derivatives,
    synthesize,
    tx_steering,
    v_vector,
    wrap_pm_pi,
)
from .relax import (
    EstimatorConfig,
    Grids,
    RelaxResult,
    TargetEstimate,
    amplitude_estimate,
    bic_score,
    fine_search,
    grid_objective,
    make_grids,
    relax_estimate,
    relax_step,
    residual_snapshot,
)
from .sequences import (
    default_zc_roots,
    make_code,
    max_autocorrelation_sidelobe,
    p_sequence_code,
    p_sequence_row,
    periodic_autocorrelation,
    random_code,
    zadoff_chu_code,
    zadoff_chu_row,
)
from .experiments import (
    McPoint,
    McReport,
    Scenario,
    paper_scenario,
    reproduce,
    run_monte_carlo,
)

__version__ = "0.1.0"

__all__ = [
    "AngleDopplerImage",
    "ArrayConfig",
    "CodeDesignReport",
    "CodeMatrix",
    "CrbMatrix",
    "EstimatorConfig",
    "FimMatrix",
    "Grids",
    "IdentifiabilityError",
    "McPoint",
    "McReport",
    "RelaxResult",
    "Scenario",
    "SdpSolution",
    "Snapshot",
    "SolverFailure",
    "Target",
    "TargetEstimate",
    "TargetScene",
    "amplitude_estimate",
    "angle_doppler_indices",
    "array_doc",
    "assemble_fim",
    "bic_score",
    "build_sdp",
    "code_doc",
    "code_grams",
    "crb",
    "default_zc_roots",
    "doc_array",
    "doc_code",
    "doc_scene",
    "doppler_steering",
    "dump_json",
    "extract_code",
    "fim_from_grams",
    "fim_numeric_oracle",
    "fim_with_unknown_noise",
    "fine_search",
    "grid_objective",
    "load_json",
    "make_code",
    "make_grids",
    "max_autocorrelation_sidelobe",
    "mf_image",
    "model_matrices",
    "noise_power_for_snr",
    "optimize_code",
    "p_sequence_code",
    "p_sequence_row",
    "paper_scenario",
    "periodic_autocorrelation",
    "random_code",
    "read_snapshot_csv",
    "relax_estimate",
    "relax_step",
    "reproduce",
    "residual_snapshot",
    "run_monte_carlo",
    "rx_steering",
    "scene_doc",
    "scene_snr",
    "solve_sdp",
    "steering_derivatives",
    "synthesize",
    "trace_crb",
    "tx_steering",
    "v_vector",
    "wrap_pm_pi",
    "write_matrix_csv",
    "write_mc_csv",
    "write_snapshot_csv",
    "zadoff_chu_code",
    "zadoff_chu_row",
]
