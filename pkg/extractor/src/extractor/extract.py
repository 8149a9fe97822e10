"""Image-folder extraction into the line-delimited record stream format.

Recognition emits one proposal per image: the image embedding and a softmax
over cosine similarities to the class prompt embeddings.  Detection tiles
each image with crop proposals, embeds every crop, scores it with the
sigmoid-then-softmax form, and keeps crops above the score floor.  A
sidecar JSON next to the stream carries the prompt embeddings so the
emitted probabilities can be recomputed and cross-checked downstream.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .backends import load_backend

log = logging.getLogger("extractor")

PLACEHOLDER = "[class k]"
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}


class ImageDecodeError(Exception):
    """An input file could not be decoded as an image."""


@dataclass(frozen=True)
class ExtractorConfig:
    model_id: str
    task: str
    class_names: Sequence[str]
    output_path: str
    prompt_template: str = f"a photo of {PLACEHOLDER}"
    device: str = "cpu"
    score_floor: float = 0.0
    max_proposals: int = 24  # detection: crop-proposal cap per image

    def __post_init__(self):
        if len(self.class_names) < 2:
            raise ValueError("need at least 2 class names")
        if self.task not in ("recognition", "detection"):
            raise ValueError(f"unknown task {self.task!r}")
        if PLACEHOLDER not in self.prompt_template:
            raise ValueError(f"prompt template lacks the {PLACEHOLDER!r} placeholder")

    def prompts(self) -> list[str]:
        return [self.prompt_template.replace(PLACEHOLDER, name)
                for name in self.class_names]


@dataclass
class ExtractionReport:
    n_images: int = 0
    n_proposals: int = 0
    skipped: list[str] = field(default_factory=list)


def _softmax(scores: np.ndarray) -> np.ndarray:
    e = np.exp(scores - np.max(scores))
    return e / e.sum()


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def recognition_probs(feature: np.ndarray, text_embeds: np.ndarray) -> np.ndarray:
    """Softmax over cosine similarities (unit-norm inputs)."""
    return _softmax(text_embeds @ feature)


def detection_probs(feature: np.ndarray, text_embeds: np.ndarray) -> np.ndarray:
    """Softmax over sigmoid-squashed cosine similarities."""
    return _softmax(_sigmoid(text_embeds @ feature))


def crop_proposals(width: int, height: int, max_proposals: int):
    """Sliding crops at a few scales, as (left, top, right, bottom, box).

    Boxes are center-format fractions of the image dimensions.
    """
    out = []
    for scale, step in ((1.0, 1.0), (0.6, 0.4), (0.35, 0.3)):
        w = scale * width
        h = scale * height
        x = 0.0
        while x + w <= width + 1e-9:
            y = 0.0
            while y + h <= height + 1e-9:
                box = ((x + w / 2) / width, (y + h / 2) / height,
                       w / width, h / height)
                out.append((int(round(x)), int(round(y)),
                            int(round(x + w)), int(round(y + h)), box))
                y += step * h
            x += step * w
        if len(out) >= max_proposals:
            break
    return out[:max_proposals]


def iter_image_files(folder: str | Path) -> list[Path]:
    return sorted(p for p in Path(folder).iterdir()
                  if p.suffix.lower() in IMAGE_SUFFIXES)


def _load_image(path: Path) -> Image.Image:
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageDecodeError(f"{path.name}: {exc}") from exc


def _stream_header(cfg: ExtractorConfig, d: int) -> dict:
    return {
        "format": "stream",
        "version": 1,
        "task": cfg.task,
        "K": len(cfg.class_names),
        "d": d,
        "class_names": list(cfg.class_names),
        "precision": "f32",
        "encoding": "jsonl",
    }


def _f32(values: np.ndarray) -> list[float]:
    return [float(v) for v in np.asarray(values, dtype=np.float32)]


def extract(images: Sequence[str | Path], cfg: ExtractorConfig) -> ExtractionReport:
    """Run the configured model over the images and write the stream file.

    Undecodable images are skipped with a warning and counted in the
    report.  Output records are written in the given image order, so the
    result is deterministic for fixed weights.
    """
    backend = load_backend(cfg.model_id, device=cfg.device)
    text_embeds = backend.embed_texts(cfg.prompts())
    d = text_embeds.shape[1]

    report = ExtractionReport()
    out_path = Path(cfg.output_path)
    with out_path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(_stream_header(cfg, d)) + "\n")
        for path in images:
            path = Path(path)
            try:
                image = _load_image(path)
            except ImageDecodeError as exc:
                log.warning("skipping %s", exc)
                report.skipped.append(path.name)
                continue
            if cfg.task == "recognition":
                feature = backend.embed_images([image])[0]
                proposals = [{
                    "feature": _f32(feature),
                    "init_pred": _f32(recognition_probs(feature, text_embeds)),
                }]
            else:
                crops = crop_proposals(image.width, image.height,
                                       cfg.max_proposals)
                patches = [image.crop(c[:4]) for c in crops]
                feats = backend.embed_images(patches)
                proposals = []
                for (_, _, _, _, box), feature in zip(crops, feats):
                    probs = detection_probs(feature, text_embeds)
                    if float(np.max(probs)) < cfg.score_floor:
                        continue
                    proposals.append({
                        "feature": _f32(feature),
                        "init_pred": _f32(probs),
                        "box": [float(v) for v in box],
                    })
            fh.write(json.dumps({"image_id": path.stem,
                                 "proposals": proposals}) + "\n")
            report.n_images += 1
            report.n_proposals += len(proposals)

    sidecar = {
        "model_id": cfg.model_id,
        "task": cfg.task,
        "prompt_template": cfg.prompt_template,
        "class_names": list(cfg.class_names),
        "prompts": cfg.prompts(),
        "text_embeds": [[float(v) for v in row] for row in text_embeds],
    }
    sidecar_path(out_path).write_text(json.dumps(sidecar), encoding="utf-8")
    if report.skipped:
        log.warning("skipped %d undecodable file(s)", len(report.skipped))
    return report


def sidecar_path(stream_path: str | Path) -> Path:
    return Path(str(stream_path) + ".sidecar.json")


def read_sidecar(stream_path: str | Path) -> dict:
    obj = json.loads(sidecar_path(stream_path).read_text(encoding="utf-8"))
    obj["text_embeds"] = np.asarray(obj["text_embeds"], dtype=np.float64)
    return obj
