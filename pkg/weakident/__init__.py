"""Top-level package for weakident."""

__author__ = """Gregory Lindsey"""
__email__ = "gclindsey@gmail.com"

try:
    from ._version import version as __version__
except ImportError:
    __version__ = "0.1.0"

from .config import RunConfig
from .models import GridSpec, ObservationSet, build_dictionary
from .regression import weak_ident
