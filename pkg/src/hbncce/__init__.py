"""Hahn-echo decoherence of a spin-1 defect in h-BN nuclear-spin baths.

Cluster-correlation-expansion simulator plus analytic echo-modulation and
cancellation-condition machinery for the decoherence-regime transition.
"""

__version__ = "0.1.0"
