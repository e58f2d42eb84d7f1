"""Automated edge-coupling engine for silicon photonics test benches.

Vision-guided coarse alignment, power-feedback fine alignment, drift-
compensated long-term lock and multi-device campaigns, all runnable
against a deterministic physics-simulated bench.
"""

__version__ = "0.1.0"
