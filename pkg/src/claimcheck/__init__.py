"""claimcheck: verify body-double identity claims from two labeled
face-image sets via descriptor embeddings, calibrated genuine/impostor
score distributions, and image-quality confound diagnostics."""

from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
