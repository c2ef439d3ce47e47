"""Training-free virtual makeup editing on pluggable diffusion backends."""

from . import backends, errors, harmonize, kernels, schedule

__version__ = "0.1.0"
