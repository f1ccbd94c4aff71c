"""Point-source localization in a three-layer ocean waveguide.

Modules
-------
waveguide : layered configuration, background and contrast coefficients
modes     : dispersion roots, vertical eigenfunctions, normalized modes
green     : normal-mode Green's function and a Hankel-transform quadrature check
forward   : volume integral equation for a known inclusion, receiver synthesis, noise
locator   : matched-field indicator and multilevel sampling search
scenario  : configuration files, presets, run orchestration
cli       : command line entry point
"""

__version__ = "0.1.0"

from .waveguide import (  # noqa: E402
    REFERENCE_WAVEGUIDE,
    DomainError,
    InclusionSpec,
    WaveguideConfig,
    background_q,
    contrast_q_tilde,
)
from .modes import ModalBasis, find_modes, mode_data, vertical_wavenumbers, wronskian  # noqa: E402
from .green import green_hankel_oracle, green_series  # noqa: E402
from .special import hankel_h1_0  # noqa: E402
from .forward import (  # noqa: E402
    ForwardModel,
    ReceiverSet,
    ScatterRecord,
    VolumeMesh,
    add_noise,
    assemble_kernel,
    born_iterate,
    scattered_field,
)
from .locator import SamplingRegion, indicator_normalize, indicator_raw, multilevel_locate  # noqa: E402

__all__ = [
    "REFERENCE_WAVEGUIDE", "DomainError", "InclusionSpec", "WaveguideConfig", "background_q",
    "contrast_q_tilde", "ModalBasis", "find_modes", "mode_data", "vertical_wavenumbers",
    "wronskian", "green_hankel_oracle", "green_series", "hankel_h1_0", "ForwardModel",
    "ReceiverSet", "ScatterRecord", "VolumeMesh", "add_noise", "assemble_kernel",
    "born_iterate", "scattered_field", "SamplingRegion", "indicator_normalize",
    "indicator_raw", "multilevel_locate",
]
