"""attrkit: score visual explanations against ground-truth masks.

The package bundles five attribution methods over a tiny differentiable
reference model, two localization metrics (rank accuracy and dual-polarity
precision), the layer/input randomization fidelity checks, and a
nonparametric statistical comparison pipeline, all wired through the
``attrkit`` command-line tool.
"""

from .arrayio import DatasetRecord, load_dataset_manifest, read_array, save_dataset_manifest, write_array
from .attribution import (
    METHOD_IDS,
    AttributionConfig,
    PatchGroupMask,
    batch_explainer,
    feature_permutation,
    grad_cam,
    gradient_shap,
    integrated_gradients,
    make_patch_groups,
    saliency,
)
from .errors import ConfigError, DataError, LoadError, NumericError, ShapeError, ToolkitError
from .metrics import DppBreakdown, MaskStats, ScoreRecord, aggregate, dpp, mask_stats, rra
from .refnet import BackwardResult, ForwardTrace, RefNet
from .sanity import (
    SanityReport,
    input_randomization_check,
    layer_randomization_check,
    pixel_shuffle,
    run_sanity_checks,
)
from .stats import (
    TestResult,
    benjamini_hochberg,
    bootstrap_power,
    cliffs_delta,
    eta_squared,
    kruskal_wallis,
    mann_whitney_u,
    rank_groups,
)
from .tensors import (
    BinaryMask,
    Heatmap,
    ImageTensor,
    bilinear_upsample,
    l2_distance,
    minmax_normalize,
    pearson_correlation,
)

__version__ = "0.1.0"
