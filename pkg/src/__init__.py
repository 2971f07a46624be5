"""
Heegner points on X1(N)
Tate normal form models, CM values of b and c, and numerical checks of the
distribution relations they satisfy
"""

__version__ = "1.0.0"
__description__ = "Heegner points on X1(N): models, CM values and distribution checks"

from .core.runner import HeegnerRunner
from .core.pipeline import VerificationPipeline
from .core.config import RunConfig, load_config

__all__ = [
    "HeegnerRunner",
    "VerificationPipeline",
    "RunConfig",
    "load_config",
]
