"""Occlusion-aware camera-graph scene partitioning and region-based
Gaussian-splat culling."""

__version__ = "0.1.0"

from .pipeline import PipelineConfig, divide_scene

__all__ = ["PipelineConfig", "divide_scene", "__version__"]
