"""Bridge from image folders to bayescache record streams."""

from .backends import BuiltinBackend, ClipBackend, ModelLoadError, load_backend
from .extract import (
    ExtractionReport,
    ExtractorConfig,
    ImageDecodeError,
    detection_probs,
    extract,
    iter_image_files,
    read_sidecar,
    recognition_probs,
    sidecar_path,
)

__version__ = "0.1.0"

__all__ = [
    "BuiltinBackend", "ClipBackend", "ExtractionReport", "ExtractorConfig",
    "ImageDecodeError", "ModelLoadError", "detection_probs", "extract",
    "iter_image_files", "load_backend", "read_sidecar", "recognition_probs",
    "sidecar_path",
]
