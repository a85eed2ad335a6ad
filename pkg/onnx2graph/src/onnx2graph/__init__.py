"""ONNX-to-graph-JSON converter for the partitioning toolchain."""

from .convert import ConversionReport, ConvertError, convert, convert_graph, render_document
from .model import ModelError, load_model
from .verify import verify, verify_document, verify_path

__version__ = "0.1.0"

__all__ = [
    "ConversionReport",
    "ConvertError",
    "ModelError",
    "convert",
    "convert_graph",
    "load_model",
    "render_document",
    "verify",
    "verify_document",
    "verify_path",
]
