"""hpnet: dynamic multi-agent trajectory forecasting on synthetic driving
scenes, built on a self-contained float64 reverse-mode autodiff core."""

__version__ = "0.1.0"
