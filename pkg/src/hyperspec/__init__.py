"""hyperspec: spectral transforms on hyperbolic space and a
boundary-control inverse solver for a 2D conformally flat metric."""

__version__ = "0.1.0"

from .hyperbolic_geometry import (
    UpperHalfPoint,
    GeodesicCurve,
    MoebiusMap,
    GAMMA_T,
    GAMMA_I,
    hyperbolic_distance,
    geodesic_through,
    mobius_apply,
    polar_coordinates,
    from_polar,
)
from .special_functions import (
    SpectralParameter,
    QuadratureConfig,
    GammaPoleError,
    bessel_I,
    bessel_K,
    bessel_J,
    gamma_complex,
    unitary_kernel,
    unitary_kernel_table,
)
from .kl_transform import (
    RadialGrid,
    KLCoefficients,
    ZeroModePair,
    HnFunction,
    default_radial_grid,
    default_spectral_grid,
    zero_mode_spectral_grid,
    kl_forward,
    kl_inverse,
    zero_mode_forward,
    zero_mode_inverse,
    green_apply,
    green_kernel,
    omega_pm,
    hn_fourier_forward,
    hn_fourier_adjoint,
    hn_fourier_inverse,
    write_samples_csv,
    read_samples_csv,
)
from .eisenstein import (
    ModularPoint,
    LatticeTruncation,
    SMatrixValue,
    PoleError,
    reduce_to_fundamental_domain,
    reduce_with_word,
    eisenstein_series,
    riemann_zeta,
    smatrix,
    critical_line_sweep,
    constant_term_check,
)
from .radon_wave import (
    RadonImage,
    WaveState,
    default_radon_sgrid,
    default_radon_kgrid,
    radon_spectral,
    radon_explicit,
    wave_propagate,
    wave_propagate_many,
    wave_energy,
    wave_spherical_mean_n3,
    radial_wave_n3,
    h3_distance,
    kernel_identity_check,
    asymptotic_profile_check,
    radon_to_csv,
    wave_states_to_csv,
    write_metadata_json,
)

__all__ = [
    "__version__",
    "UpperHalfPoint",
    "GeodesicCurve",
    "MoebiusMap",
    "GAMMA_T",
    "GAMMA_I",
    "hyperbolic_distance",
    "geodesic_through",
    "mobius_apply",
    "polar_coordinates",
    "from_polar",
    "SpectralParameter",
    "QuadratureConfig",
    "GammaPoleError",
    "bessel_I",
    "bessel_K",
    "bessel_J",
    "gamma_complex",
    "unitary_kernel",
    "unitary_kernel_table",
    "RadialGrid",
    "KLCoefficients",
    "ZeroModePair",
    "HnFunction",
    "default_radial_grid",
    "default_spectral_grid",
    "zero_mode_spectral_grid",
    "kl_forward",
    "kl_inverse",
    "zero_mode_forward",
    "zero_mode_inverse",
    "green_apply",
    "green_kernel",
    "omega_pm",
    "hn_fourier_forward",
    "hn_fourier_adjoint",
    "hn_fourier_inverse",
    "write_samples_csv",
    "read_samples_csv",
    "ModularPoint",
    "LatticeTruncation",
    "SMatrixValue",
    "PoleError",
    "reduce_to_fundamental_domain",
    "reduce_with_word",
    "eisenstein_series",
    "riemann_zeta",
    "smatrix",
    "critical_line_sweep",
    "constant_term_check",
    "RadonImage",
    "WaveState",
    "default_radon_sgrid",
    "default_radon_kgrid",
    "radon_spectral",
    "radon_explicit",
    "wave_propagate",
    "wave_propagate_many",
    "wave_energy",
    "wave_spherical_mean_n3",
    "radial_wave_n3",
    "h3_distance",
    "kernel_identity_check",
    "asymptotic_profile_check",
    "radon_to_csv",
    "wave_states_to_csv",
    "write_metadata_json",
]
