"""Energy-conserving mixed-form wave solver on spline de Rham spaces."""

__version__ = "0.1.0"
