"""Micro-Doppler radar simulation, signal processing and motion classification."""

from . import complexity, config, dsp, errors, features, learn, sim

__all__ = ["complexity", "config", "dsp", "errors", "features", "learn", "sim"]
__version__ = "0.1.0"
