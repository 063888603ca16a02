"""HTTP face-recognition scoring oracle with an enrollable gallery."""

from .backbone import EMBED_DIM, INPUT_SIZE, EmbeddingBackbone
from .gallery import EmptyGalleryError, Gallery
from .service import DEFAULT_TEMPERATURE, create_app
from .toyfaces import identity_image, toy_gallery

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TEMPERATURE",
    "EMBED_DIM",
    "EmbeddingBackbone",
    "EmptyGalleryError",
    "Gallery",
    "INPUT_SIZE",
    "create_app",
    "identity_image",
    "toy_gallery",
]
