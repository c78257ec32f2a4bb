"""Interferometric polarization-path correlation simulator.

Closed-form evaluation of the local and joint observables of a two-arm
frequency-tagged polarization network, plus a stochastic time-tagged
photon-pair pipeline whose streaming coincidence analysis reproduces the
same observables.
"""

from .optics import (
    Detune,
    FieldState,
    ModeLabel,
    Path,
    Pol,
    Port,
    aom_tag,
    bs_transform,
    hwp_22_5,
    mirror,
    pbs_route,
    polarizer_project,
)
from .interferometer import (
    EraserSetting,
    Orientation,
    PairSetting,
    eraser_amplitudes,
    eraser_intensity,
    local_intensity,
    output_fields,
    pair_phase,
    port_intensities,
)
from .source import (
    DetuningGrid,
    GridMode,
    PairBatch,
    PairClass,
    PairEvent,
    SourceConfig,
    multi_pair_error_ratio,
    poisson_pair_probability,
    sample_n_pairs,
    sample_pairs,
)
from .detection import (
    CoincidenceSetting,
    CorrelationEstimate,
    Outcome,
    SelectionRule,
    correlation_r,
    heterodyne_product,
    outcome_distribution,
    selection_efficiency,
    visibility,
)
from .eventstream import (
    CoincidenceRecord,
    RejectReason,
    TagStream,
    TimeTagRecord,
    decode_stream,
    encode_stream,
    histogram_tau_si,
    match_coincidences,
    synthesize_stream,
)
from .experiments import (
    ChshResult,
    ExperimentConfig,
    RunMode,
    Table,
    analytic_r,
    emit_csv,
    run_chsh,
    run_dephasing,
    run_fig2a,
    run_fig2b,
    run_local,
)

__version__ = "0.1.0"
