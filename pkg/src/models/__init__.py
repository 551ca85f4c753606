from .grid import Grid, SphereRotation, Topology
from .field import Field
from .basis import HatBasis1D, RadialAnisotropicBasis, basis_from_dict
from .kernels import (
    AssembledKernel,
    DifferentialKernel,
    DirectionalSignature,
    DiscoParams,
    PaddingMode,
    SpectralWeights,
)
from .config import BlockConfig, ModelConfig, RunConfig, TrainConfig
from .dataset import DarcySample, Dataset, ParabolaSpec
from .metrics import Check, EpochMetrics, GradCheckReport, SuiteResult

__all__ = [
    'Grid', 'SphereRotation', 'Topology', 'Field',
    'HatBasis1D', 'RadialAnisotropicBasis', 'basis_from_dict',
    'AssembledKernel', 'DifferentialKernel', 'DirectionalSignature', 'DiscoParams',
    'PaddingMode', 'SpectralWeights',
    'BlockConfig', 'ModelConfig', 'RunConfig', 'TrainConfig',
    'DarcySample', 'Dataset', 'ParabolaSpec',
    'Check', 'EpochMetrics', 'GradCheckReport', 'SuiteResult',
]
