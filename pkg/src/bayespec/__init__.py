"""Bayesian spectral deconvolution with waste-free SMC and replica exchange."""
from .kernel import available_backends, backend_name, use_backend

__version__ = "0.1.0"
__all__ = ["available_backends", "backend_name", "use_backend", "__version__"]
