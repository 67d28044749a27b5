"""Temporally grounded disease knowledge graph construction and evaluation."""

from chronokg.model import PIPELINE_VERSION as __version__

__all__ = ["__version__"]
