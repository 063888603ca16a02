"""Deterministic face-embedding backbone.

The service ranks gallery identities by cosine similarity between
embeddings, so the one property the backbone must guarantee is stability:
identical input bytes produce identical vectors, in any process, on any
day.  Three choices enforce that:

* weights are drawn once from a pinned seed at construction;
* inference always runs in eval mode under ``no_grad``;
* preprocessing is fixed (RGB, bilinear resize to a square input, [0, 1]
  scaling) with no augmentation or randomness.

The network deliberately has no normalisation layers: batch statistics are
the classic way an "eval mode" model still manages to drift, and a plain
conv stack has nothing equivalent to get wrong.  Swapping in a stronger
backbone is a construction-time choice — anything exposing this class's
``embed_one`` contract slots into the service unchanged.
"""

import io
import threading

import numpy as np
import torch
from PIL import Image
from torch import nn

INPUT_SIZE = 64
EMBED_DIM = 128


class _ConvStack(nn.Module):
    def __init__(self, dim):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 16, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(32, 64, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(4),
        )
        self.head = nn.Linear(64 * 4 * 4, dim)

    def forward(self, x):
        return self.head(self.features(x).flatten(1))


class EmbeddingBackbone:
    """Image bytes -> fixed-length embedding vector.

    ``seed`` pins the random weight draw; two backbones built with the same
    seed and dimensions are functionally identical.
    """

    def __init__(self, seed: int = 0, dim: int = EMBED_DIM,
                 input_size: int = INPUT_SIZE):
        self.seed = int(seed)
        self.dim = int(dim)
        self.input_size = int(input_size)
        # manual_seed touches torch's global generator; construct eagerly and
        # once so later user code cannot perturb the weight draw.
        torch.manual_seed(self.seed)
        self._net = _ConvStack(self.dim)
        self._net.eval()
        for p in self._net.parameters():
            p.requires_grad_(False)
        self._lock = threading.Lock()

    def preprocess(self, data: bytes) -> torch.Tensor:
        """Decode and normalise one image; ValueError on undecodable bytes."""
        try:
            with Image.open(io.BytesIO(data)) as im:
                rgb = im.convert("RGB").resize(
                    (self.input_size, self.input_size), Image.BILINEAR)
        except Exception as exc:
            raise ValueError(f"undecodable image: {exc}") from None
        arr = np.asarray(rgb, dtype=np.float32) / 255.0
        return torch.from_numpy(arr).permute(2, 0, 1)

    def embed_one(self, data: bytes) -> np.ndarray:
        """Embedding for one image, as a float64 vector of length ``dim``.

        Single-image batches only: batching can reorder floating-point
        reductions, and per-probe bit-stability is worth more here than
        batched throughput.
        """
        x = self.preprocess(data).unsqueeze(0)
        with self._lock, torch.no_grad():
            out = self._net(x)
        return out.squeeze(0).numpy().astype(np.float64)

    def embed_many(self, blobs) -> np.ndarray:
        """Row-stacked embeddings for a sequence of image byte strings."""
        if not blobs:
            raise ValueError("at least one image is required")
        return np.stack([self.embed_one(b) for b in blobs])
