"""logosynth: synthetic context-logo detection datasets and scoring.

Warp transparent logo exemplars (scale, shear, rotation, optional tilt,
colour jitter), paste them into context images with automatic bounding-box
annotations, stage the results into curriculum training plans, and score
detector output with per-class AP / mAP.
"""

__version__ = "0.1.0"

from .errors import LogoSynthError

__all__ = ["LogoSynthError", "__version__"]
