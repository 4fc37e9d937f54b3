"""Multiresolution hash encoding for neural fields, trained with hand-written backprop."""
from ._backend import BACKEND
from .encoding import (
    FeatureTables,
    GridLevelSpec,
    HashEncodingConfig,
    encode_backward,
    encode_forward,
    frequency_encode,
    grid_vertex_index,
    interpolation_weights,
    level_resolutions,
    spatial_hash,
)
from .mlp import MlpConfig, MlpParams, glorot_init, mlp_backward, mlp_forward
from .optim import AdamHyper, AdamState, LrSchedule, ParamGroup, adam_step, lr_at

__version__ = "0.1.0"
