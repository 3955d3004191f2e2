"""CFAR-based two-level preprocessing for 4D radar tensors, PRVM/RRIM
evaluation on synthetic scenes, and a numeric vertical-encoding reference."""

from .cfar import (
    CaCfarConfig,
    TopPercentConfig,
    ca_cfar_1d,
    ca_threshold_factor,
    ccfar_step1,
    os_select_top_k,
    top_percent_global,
)
from .metrics import RangeBins, default_bins, parse_grid, prvm_rrim, sweep_report, ablation_configs
from .pipeline import (
    CctpConfig,
    CctpOutput,
    cctp_step1,
    cctp_step2,
    cctp_step3,
    config_label,
    run_cctp,
    vertical_weighted_projection,
)
from .synth import SceneSpec, TargetSpec, ClutterPatch, demo_scene_spec, generate_scene
from .tensor import (
    BoolMask,
    CellIndex,
    PolarGrid,
    RadarTensor,
    SparseMeasurementSet,
    cell_to_cartesian,
    default_grid,
    from_sparse,
    load,
    save,
    to_sparse,
)

__version__ = "0.1.0"
