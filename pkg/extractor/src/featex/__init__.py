"""featex: embedding extraction into fusion-engine feature files."""

from .extract import ExtractSpec, extract_features, read_image_list
from .models import REGISTRY, SUPPORTED, build_model
from .preprocess import prepare_image
from .writer import write_feature_file

__version__ = "0.1.0"

__all__ = [
    "REGISTRY",
    "SUPPORTED",
    "ExtractSpec",
    "build_model",
    "extract_features",
    "prepare_image",
    "read_image_list",
    "write_feature_file",
]
