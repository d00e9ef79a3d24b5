"""Temporally smooth facial-behavior generation for dyadic interactions.

The compiled core exposes the point distribution model, synthetic corpus
generator, affect-shape dictionary, conditional LSTM, shape-space conditional
GAN, sketch renderer and evaluation metrics.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
