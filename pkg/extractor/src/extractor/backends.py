"""Embedding backends: a deterministic built-in featurizer and real encoders.

A backend maps PIL images and text prompts into one shared embedding space
(all vectors unit L2 norm).  ``builtin:<seed>`` needs no weights and exists
so the full extraction pipeline runs reproducibly anywhere; real encoders
load through ``transformers`` when their weights are resolvable.
"""

from __future__ import annotations

import hashlib

import numpy as np


class ModelLoadError(Exception):
    """The requested model could not be constructed or its weights loaded."""


class BuiltinBackend:
    """Weights-free featurizer for pipeline exercise and testing.

    Images are reduced to coarse color/gradient statistics and projected
    through a seeded random matrix; prompts are hashed into seeded unit
    vectors.  Both are deterministic, but the two spaces share no learned
    alignment, so predictions are structurally valid rather than accurate.
    """

    PATCH = 8  # images are pooled to PATCH x PATCH x RGB statistics

    def __init__(self, d: int = 64, seed: int = 0):
        self.d = d
        rng = np.random.default_rng(seed)
        n_stats = self.PATCH * self.PATCH * 3 + 2
        self._projection = rng.standard_normal((self.d, n_stats)) / np.sqrt(n_stats)

    def _stats(self, image) -> np.ndarray:
        small = image.convert("RGB").resize((self.PATCH, self.PATCH))
        arr = np.asarray(small, dtype=np.float64) / 255.0
        flat = arr.reshape(-1)
        gray = arr.mean(axis=2)
        grad = [np.abs(np.diff(gray, axis=0)).mean(),
                np.abs(np.diff(gray, axis=1)).mean()]
        stats = np.concatenate([flat, grad])
        return stats - stats.mean()

    def embed_images(self, images) -> np.ndarray:
        feats = np.stack([np.tanh(self._projection @ self._stats(im))
                          for im in images])
        norms = np.linalg.norm(feats, axis=1, keepdims=True)
        return feats / norms

    def embed_texts(self, prompts) -> np.ndarray:
        rows = []
        for prompt in prompts:
            digest = hashlib.sha256(prompt.encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            v = rng.standard_normal(self.d)
            rows.append(v / np.linalg.norm(v))
        return np.stack(rows)


class ClipBackend:
    """Contrastive image/text encoder via ``transformers``.

    Requires the model weights to be resolvable (local cache or hub
    access); otherwise raises ModelLoadError.
    """

    def __init__(self, model_id: str, device: str = "cpu"):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ModelLoadError(f"transformers/torch not installed: {exc}") from exc
        try:
            self._model = CLIPModel.from_pretrained(model_id).to(device).eval()
            self._processor = CLIPProcessor.from_pretrained(model_id)
        except Exception as exc:
            raise ModelLoadError(f"cannot load {model_id!r}: {exc}") from exc
        self._torch = torch
        self._device = device
        self.d = int(self._model.config.projection_dim)

    def embed_images(self, images) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            inputs = self._processor(images=list(images), return_tensors="pt")
            inputs = {k: v.to(self._device) for k, v in inputs.items()}
            feats = self._model.get_image_features(**inputs)
            feats = feats / feats.norm(dim=-1, keepdim=True)
        return feats.cpu().numpy().astype(np.float64)

    def embed_texts(self, prompts) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            inputs = self._processor(text=list(prompts), return_tensors="pt",
                                     padding=True)
            inputs = {k: v.to(self._device) for k, v in inputs.items()}
            feats = self._model.get_text_features(**inputs)
            feats = feats / feats.norm(dim=-1, keepdim=True)
        return feats.cpu().numpy().astype(np.float64)


def load_backend(model_id: str, device: str = "cpu"):
    """Resolve a model id to a backend.

    ``builtin`` or ``builtin:<seed>[:<dim>]`` selects the weights-free
    featurizer; anything else is treated as a hub id for the contrastive
    encoder.
    """
    if model_id == "builtin" or model_id.startswith("builtin:"):
        parts = model_id.split(":")
        seed = int(parts[1]) if len(parts) > 1 and parts[1] else 0
        d = int(parts[2]) if len(parts) > 2 else 64
        return BuiltinBackend(d=d, seed=seed)
    return ClipBackend(model_id, device=device)
