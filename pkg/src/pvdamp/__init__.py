"""Multi-coil compressed-sensing MRI reconstruction with on-the-fly
SURE-tuned thresholds under a tracked colored aliasing model."""

__version__ = "0.1.0"

from ._kernels import available_backends, get_backend, set_backend
from .aliasing import NoiseCov, TauMap, empirical_error, normalized_residual, tau_update
from .coil import (
    CoilSet,
    XiMap,
    adjoint,
    compute_xi,
    forward,
    normalize_sensitivities,
    pca_compress,
    simulate_sensitivities,
)
from .core import (
    ArrayFormatError,
    PvdampError,
    ValidationError,
    fft2c,
    ifft2c,
    load_array,
    save_array,
)
from .data import Phantom, acquire, make_noise_cov, make_phantom
from .denoise import (
    DenoiseResult,
    ThresholdSet,
    csure,
    soft_threshold,
    subband_divergence,
    sure_denoise,
    tune_thresholds,
)
from .metrics import (
    GaussianityReport,
    MetricsReport,
    SEBounds,
    evaluate_pair,
    hfen,
    nmse,
    se_report,
    ssim,
    support_mask,
)
from .sampling import (
    DensityMap,
    SamplingMask,
    draw_mask,
    make_density,
    realized_acceleration,
)
from .solver import (
    OnsagerDegenerateError,
    ReconResult,
    SolverConfig,
    fista,
    pvdamp,
    sure_it,
    tune_fista_lambda,
    zero_filled,
)
from .wavelet import (
    SubbandMap,
    WaveletCoeffs,
    dwt2,
    idwt2,
    squared_filter_dwt2,
    subband_map,
    subband_power_spectra,
)
