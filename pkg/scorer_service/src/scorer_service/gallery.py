"""Enrollable identity gallery.

Each label maps to the running sum of every embedding ever enrolled under
it plus the image count, so repeat enrolment transparently averages over
the full history rather than overwriting.  The reference vector handed to
scoring is the unit-normalised mean.

Enrolment takes an exclusive lock; reads copy the state they need under the
same lock and do their arithmetic outside it, which keeps scoring wait-free
in practice while guaranteeing it never observes a half-applied update.
"""

import threading

import numpy as np


class EmptyGalleryError(RuntimeError):
    """Scoring was requested before any identity was enrolled."""


class Gallery:
    def __init__(self, dim: int):
        self.dim = int(dim)
        self._sums: dict[str, np.ndarray] = {}
        self._counts: dict[str, int] = {}
        self._lock = threading.Lock()

    def __len__(self):
        with self._lock:
            return len(self._sums)

    def enroll(self, label: str, embeddings) -> int:
        """Fold embeddings into ``label``; returns its total image count."""
        emb = np.asarray(embeddings, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[0] == 0:
            raise ValueError("embeddings must be a non-empty (n, dim) array")
        if emb.shape[1] != self.dim:
            raise ValueError(f"embedding dim {emb.shape[1]} != gallery dim {self.dim}")
        if not np.all(np.isfinite(emb)):
            raise ValueError("embeddings must be finite")
        with self._lock:
            if label in self._sums:
                self._sums[label] = self._sums[label] + emb.sum(axis=0)
                self._counts[label] += emb.shape[0]
            else:
                self._sums[label] = emb.sum(axis=0)
                self._counts[label] = emb.shape[0]
            return self._counts[label]

    def labels(self) -> list:
        with self._lock:
            return sorted(self._sums)

    def counts(self) -> dict:
        with self._lock:
            return dict(self._counts)

    def snapshot(self):
        """(labels, matrix): sorted labels and row-aligned unit mean vectors."""
        with self._lock:
            if not self._sums:
                raise EmptyGalleryError("gallery is empty; enroll identities first")
            labels = sorted(self._sums)
            means = np.stack([self._sums[lab] / self._counts[lab]
                              for lab in labels])
        norms = np.linalg.norm(means, axis=1, keepdims=True)
        return labels, means / np.maximum(norms, 1e-12)
