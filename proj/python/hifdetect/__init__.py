"""High-impedance fault simulation and detection pipeline."""

from hifdetect._core import (
    ConfigError,
    ParameterError,
    SampleRateError,
    build_hankel,
    canonical_echo,
    detect,
    hankel_svd,
    optimal_rank,
    preset,
    run,
    simulate,
    version,
)

__version__ = version()

__all__ = [
    "ConfigError",
    "ParameterError",
    "SampleRateError",
    "build_hankel",
    "canonical_echo",
    "detect",
    "hankel_svd",
    "optimal_rank",
    "preset",
    "run",
    "simulate",
    "version",
    "__version__",
]
