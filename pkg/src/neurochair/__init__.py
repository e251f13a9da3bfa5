"""EEG-driven wheelchair control pipeline with a simulated headset and digital twin."""

__version__ = "0.1.0"

from .signal_model import (
    Band,
    BandDefinition,
    ChannelDescriptor,
    CommandLabel,
    DEFAULT_BANDS,
    EEGFrame,
    Epoch,
    Hemisphere,
    Montage,
    ValidationError,
    classify_hemisphere,
    default_montage,
)

__all__ = [
    "Band",
    "BandDefinition",
    "ChannelDescriptor",
    "CommandLabel",
    "DEFAULT_BANDS",
    "EEGFrame",
    "Epoch",
    "Hemisphere",
    "Montage",
    "ValidationError",
    "classify_hemisphere",
    "default_montage",
]
