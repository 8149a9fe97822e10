"""File formats: record streams, cache snapshots, session results, configs.

The primary stream format is line-delimited JSON with a header object on
line 1; an optional length-prefixed binary encoding (little-endian, 32-bit
floats) covers large streams.  Snapshots and results are plain JSON and
round-trip 64-bit values exactly.  The streaming reader yields one image
at a time and never materializes the whole file.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from .cache import CacheEntry, CacheState
from .errors import BayesCacheError, SchemaError, VersionMismatch
from .pipeline import ImageResult, ProposalOutcome, SessionResult
from .records import (
    AdaptConfig,
    Box,
    ImageRecord,
    PredictionTriple,
    ProposalRecord,
    validate_record,
)
from .surrogate import PrototypeBank, ShiftSpec

FORMAT_VERSION = 1
_BINARY_MAGIC = b"\x00BIN"


@dataclass(frozen=True)
class StreamHeader:
    task: str
    K: int
    d: int
    class_names: Optional[list[str]] = None
    precision: str = "f64"
    encoding: str = "jsonl"
    version: int = FORMAT_VERSION

    def config(self, **overrides) -> AdaptConfig:
        """AdaptConfig seeded with the stream's task, K and d."""
        return AdaptConfig(K=self.K, d=self.d, task=self.task, **overrides)


def _header_dict(header: StreamHeader) -> dict:
    return {
        "format": "stream",
        "version": header.version,
        "task": header.task,
        "K": header.K,
        "d": header.d,
        "class_names": header.class_names,
        "precision": header.precision,
        "encoding": header.encoding,
    }


def _parse_header(line: str) -> StreamHeader:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line 1: header is not valid JSON ({exc})") from exc
    if obj.get("format") != "stream":
        raise SchemaError("line 1: not a stream file")
    version = obj.get("version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"unsupported stream version {version!r}")
    for key in ("task", "K", "d"):
        if key not in obj:
            raise SchemaError(f"line 1: header lacks {key!r}")
    return StreamHeader(
        task=obj["task"], K=int(obj["K"]), d=int(obj["d"]),
        class_names=obj.get("class_names"),
        precision=obj.get("precision", "f64"),
        encoding=obj.get("encoding", "jsonl"),
        version=version,
    )


def _cast(values: np.ndarray, precision: str) -> list[float]:
    if precision == "f32":
        return [float(v) for v in np.asarray(values, dtype=np.float32)]
    return [float(v) for v in np.asarray(values, dtype=np.float64)]


def _box_list(box: Optional[Box], precision: str) -> Optional[list[float]]:
    if box is None:
        return None
    return _cast(np.array([box.x, box.y, box.w, box.h]), precision)


def _record_dict(rec: ImageRecord, precision: str) -> dict:
    proposals = []
    for p in rec.proposals:
        entry = {
            "feature": _cast(p.feature, precision),
            "init_pred": _cast(p.init_pred, precision),
        }
        if p.box is not None:
            entry["box"] = _box_list(p.box, precision)
        if p.gt_label is not None:
            entry["gt_label"] = int(p.gt_label)
        if p.gt_box is not None:
            entry["gt_box"] = _box_list(p.gt_box, precision)
        proposals.append(entry)
    return {"image_id": rec.image_id, "proposals": proposals}


def _record_from_dict(obj: dict, where: str) -> ImageRecord:
    try:
        proposals = []
        for p in obj["proposals"]:
            box = Box(*p["box"]) if p.get("box") is not None else None
            gt_box = Box(*p["gt_box"]) if p.get("gt_box") is not None else None
            proposals.append(ProposalRecord(
                feature=np.asarray(p["feature"], dtype=np.float64),
                init_pred=np.asarray(p["init_pred"], dtype=np.float64),
                box=box,
                gt_label=p.get("gt_label"),
                gt_box=gt_box,
            ))
        return ImageRecord(image_id=obj["image_id"], proposals=tuple(proposals))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: malformed record ({exc})") from exc


def write_stream(path: str | Path, header: StreamHeader,
                 records: Iterable[ImageRecord]) -> None:
    """Write a stream in the header's declared encoding and precision."""
    path = Path(path)
    if header.encoding == "binary":
        _write_binary(path, header, records)
        return
    if header.encoding != "jsonl":
        raise ValueError(f"unknown stream encoding {header.encoding!r}")
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(_header_dict(header)) + "\n")
        for rec in records:
            fh.write(json.dumps(_record_dict(rec, header.precision)) + "\n")


def read_stream(path: str | Path, validate: bool = True
                ) -> tuple[StreamHeader, Iterator[ImageRecord]]:
    """Open a stream: returns the header and a lazy, validating iterator."""
    path = Path(path)
    with path.open("rb") as fh:
        first = fh.readline()
    header = _parse_header(first.decode("utf-8"))
    cfg = header.config() if validate else None
    if header.encoding == "binary":
        return header, _iter_binary(path, header, cfg, len(first))
    if header.encoding != "jsonl":
        raise SchemaError(f"line 1: unknown encoding {header.encoding!r}")
    return header, _iter_jsonl(path, cfg)


def _iter_jsonl(path: Path, cfg: Optional[AdaptConfig]) -> Iterator[ImageRecord]:
    with path.open("r", encoding="utf-8") as fh:
        fh.readline()
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {lineno}: invalid JSON ({exc})") from exc
            rec = _record_from_dict(obj, f"line {lineno}")
            if cfg is not None:
                try:
                    rec = validate_record(rec, cfg)
                except SchemaError as exc:
                    raise SchemaError(f"line {lineno}: {exc}") from exc
                except BayesCacheError as exc:
                    raise SchemaError(
                        f"line {lineno} ({obj.get('image_id')}): {exc}"
                    ) from exc
            yield rec


# --- binary encoding -----------------------------------------------------
# record := uint32 payload_len, payload
# payload := uint16 id_len, id utf-8, uint16 n_proposals, proposal*
# proposal := uint8 flags (1 box, 2 gt_label, 4 gt_box),
#             f32[d] feature, f32[K] init_pred,
#             [f32[4] box] [int32 gt_label] [f32[4] gt_box]

def _pack_proposal(p: ProposalRecord, d: int, k: int) -> bytes:
    flags = (1 if p.box is not None else 0) \
        | (2 if p.gt_label is not None else 0) \
        | (4 if p.gt_box is not None else 0)
    parts = [struct.pack("<B", flags),
             np.asarray(p.feature, dtype="<f4").tobytes(),
             np.asarray(p.init_pred, dtype="<f4").tobytes()]
    if p.box is not None:
        parts.append(np.array([p.box.x, p.box.y, p.box.w, p.box.h],
                              dtype="<f4").tobytes())
    if p.gt_label is not None:
        parts.append(struct.pack("<i", p.gt_label))
    if p.gt_box is not None:
        parts.append(np.array([p.gt_box.x, p.gt_box.y, p.gt_box.w, p.gt_box.h],
                              dtype="<f4").tobytes())
    return b"".join(parts)


def _write_binary(path: Path, header: StreamHeader,
                  records: Iterable[ImageRecord]) -> None:
    hdr = _header_dict(header)
    hdr["precision"] = "f32"
    hdr["encoding"] = "binary"
    with path.open("wb") as fh:
        fh.write((json.dumps(hdr) + "\n").encode("utf-8"))
        for rec in records:
            ident = rec.image_id.encode("utf-8")
            payload = [struct.pack("<H", len(ident)), ident,
                       struct.pack("<H", len(rec.proposals))]
            payload += [_pack_proposal(p, header.d, header.K)
                        for p in rec.proposals]
            blob = b"".join(payload)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)


class _Cursor:
    def __init__(self, blob: bytes, where: str):
        self.blob = blob
        self.pos = 0
        self.where = where

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise SchemaError(f"{self.where}: truncated record")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def floats(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * n), dtype="<f4").astype(np.float64)


def _iter_binary(path: Path, header: StreamHeader,
                 cfg: Optional[AdaptConfig], offset: int) -> Iterator[ImageRecord]:
    d, k = header.d, header.K
    with path.open("rb") as fh:
        fh.seek(offset)
        ordinal = 0
        while True:
            prefix = fh.read(4)
            if not prefix:
                return
            if len(prefix) < 4:
                raise SchemaError(f"record {ordinal}: truncated length prefix")
            (length,) = struct.unpack("<I", prefix)
            blob = fh.read(length)
            if len(blob) < length:
                raise SchemaError(f"record {ordinal}: truncated payload")
            where = f"record {ordinal}"
            cur = _Cursor(blob, where)
            (id_len,) = struct.unpack("<H", cur.take(2))
            image_id = cur.take(id_len).decode("utf-8")
            (n_props,) = struct.unpack("<H", cur.take(2))
            proposals = []
            for _ in range(n_props):
                (flags,) = struct.unpack("<B", cur.take(1))
                feature = cur.floats(d)
                init_pred = cur.floats(k)
                box = Box(*cur.floats(4)) if flags & 1 else None
                gt_label = struct.unpack("<i", cur.take(4))[0] if flags & 2 else None
                gt_box = Box(*cur.floats(4)) if flags & 4 else None
                proposals.append(ProposalRecord(
                    feature=feature, init_pred=init_pred, box=box,
                    gt_label=gt_label, gt_box=gt_box,
                ))
            rec = ImageRecord(image_id=image_id, proposals=tuple(proposals))
            if cfg is not None:
                try:
                    rec = validate_record(rec, cfg)
                except SchemaError as exc:
                    raise SchemaError(f"{where}: {exc}") from exc
                except BayesCacheError as exc:
                    raise SchemaError(f"{where} ({image_id}): {exc}") from exc
            yield rec
            ordinal += 1


# --- cache snapshots ------------------------------------------------------

def _entry_dict(e: CacheEntry) -> dict:
    return {
        "prototype": [float(v) for v in e.prototype],
        "prior": [float(v) for v in e.prior],
        "count": e.count,
        "scale": None if e.scale is None else [float(v) for v in e.scale],
    }


def write_snapshot(path: str | Path, cache: CacheState) -> None:
    """Serialize the cache losslessly (64-bit) for resume and inspection."""
    obj = {
        "format": "cache-snapshot",
        "version": FORMAT_VERSION,
        "created_total": cache.created_total,
        "updated_total": cache.updated_total,
        "entries": [_entry_dict(e) for e in cache.entries],
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def read_snapshot(path: str | Path) -> CacheState:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("format") != "cache-snapshot":
        raise SchemaError("not a cache snapshot file")
    if obj.get("version") != FORMAT_VERSION:
        raise VersionMismatch(f"unsupported snapshot version {obj.get('version')!r}")
    entries = []
    for e in obj["entries"]:
        entries.append(CacheEntry(
            prototype=np.asarray(e["prototype"], dtype=np.float64),
            prior=np.asarray(e["prior"], dtype=np.float64),
            count=int(e["count"]),
            scale=None if e.get("scale") is None
            else np.asarray(e["scale"], dtype=np.float64),
        ))
    return CacheState(tuple(entries), int(obj["created_total"]),
                      int(obj["updated_total"]))


# --- session results ------------------------------------------------------

def _floats(values) -> Optional[list[float]]:
    return None if values is None else [float(v) for v in values]


def write_results(path: str | Path, result: SessionResult,
                  include_match_dist: bool = False) -> None:
    """Results file: header line, then one JSON object per image."""
    cfg = result.config
    header = {
        "format": "results",
        "version": FORMAT_VERSION,
        "task": cfg.task, "K": cfg.K, "d": cfg.d,
        "config": {
            "tau1": cfg.tau1, "tau2": cfg.tau2, "ws": cfg.ws,
            "update_strategy": cfg.update_strategy,
            "fusion_strategy": cfg.fusion_strategy,
            "momentum_alpha": cfg.momentum_alpha,
            "delayed_k": cfg.delayed_k,
            "prior_adapt": cfg.prior_adapt,
        },
        "cache_trace": list(result.cache_trace),
        "elapsed_seconds": result.elapsed_seconds,
    }
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for img in result.images:
            rows = []
            for o in img.outcomes:
                t = o.triple
                row = {
                    "init_pred": _floats(t.init_pred),
                    "cache_pred": _floats(t.cache_pred),
                    "final_pred": _floats(t.final_pred),
                    "matched_index": t.matched_index,
                    "match_similarity": t.match_similarity,
                    "absorbed": t.absorbed,
                    "gt_label": o.gt_label,
                    "box": _box_list(o.box, "f64"),
                    "gt_box": _box_list(o.gt_box, "f64"),
                }
                if include_match_dist and t.match_dist is not None:
                    row["match_dist"] = _floats(t.match_dist)
                rows.append(row)
            fh.write(json.dumps({"image_id": img.image_id,
                                 "proposals": rows}) + "\n")


def read_results(path: str | Path) -> SessionResult:
    """Rebuild a SessionResult (without the cache) from a results file."""
    with Path(path).open("r", encoding="utf-8") as fh:
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line 1: invalid JSON ({exc})") from exc
        if header.get("format") != "results":
            raise SchemaError("not a results file")
        if header.get("version") != FORMAT_VERSION:
            raise VersionMismatch(
                f"unsupported results version {header.get('version')!r}"
            )
        cfg = AdaptConfig(K=header["K"], d=header["d"], task=header["task"],
                          **header["config"])
        images = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {lineno}: invalid JSON ({exc})") from exc
            outcomes = []
            for row in obj["proposals"]:
                arr = lambda v: None if v is None else np.asarray(v, dtype=np.float64)
                triple = PredictionTriple(
                    init_pred=arr(row["init_pred"]),
                    final_pred=arr(row["final_pred"]),
                    cache_pred=arr(row.get("cache_pred")),
                    match_dist=arr(row.get("match_dist")),
                    matched_index=row.get("matched_index"),
                    match_similarity=row.get("match_similarity"),
                    absorbed=bool(row.get("absorbed", False)),
                )
                outcomes.append(ProposalOutcome(
                    triple=triple,
                    gt_label=row.get("gt_label"),
                    box=None if row.get("box") is None else Box(*row["box"]),
                    gt_box=None if row.get("gt_box") is None else Box(*row["gt_box"]),
                ))
            images.append(ImageResult(image_id=obj["image_id"],
                                      outcomes=tuple(outcomes)))
    return SessionResult(
        config=cfg, images=images, cache=None,
        cache_trace=list(header.get("cache_trace", [])),
        elapsed_seconds=float(header.get("elapsed_seconds", 0.0)),
    )


# --- simulation configs ---------------------------------------------------

def write_sim_config(path: str | Path, bank: PrototypeBank, shift: ShiftSpec,
                     task: str, n_images: int, proposals_per_image: int = 1,
                     class_names: Optional[list[str]] = None,
                     precision: str = "f64", encoding: str = "jsonl") -> None:
    """Persist a complete, reproducible stream-generation setup."""
    obj = {
        "format": "sim-config",
        "version": FORMAT_VERSION,
        "task": task,
        "n_images": n_images,
        "proposals_per_image": proposals_per_image,
        "class_names": class_names,
        "precision": precision,
        "encoding": encoding,
        "bank": {
            "text_embeds": [[float(v) for v in row] for row in bank.text_embeds],
            "class_scales": None if bank.class_scales is None
            else [[float(v) for v in row] for row in bank.class_scales],
        },
        "shift": {
            "prior_skew": [float(v) for v in shift.prior_skew],
            "prototype_drift": shift.prototype_drift,
            "noise_sigma": shift.noise_sigma,
            "scale_jitter": shift.scale_jitter,
            "background_rate": shift.background_rate,
            "seed": shift.seed,
        },
    }
    Path(path).write_text(json.dumps(obj, indent=2), encoding="utf-8")


def read_sim_config(path: str | Path) -> dict:
    """Load a simulation config; returns a dict with bank/shift rebuilt.

    The bank may be given explicitly (text_embeds) or by generation
    parameters (K, d, seed, ...).
    """
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("format") != "sim-config":
        raise SchemaError("not a simulation config file")
    if obj.get("version") != FORMAT_VERSION:
        raise VersionMismatch(f"unsupported config version {obj.get('version')!r}")
    from .surrogate import make_prototype_bank  # local to avoid cycle at import

    bank_spec = obj["bank"]
    if "text_embeds" in bank_spec:
        bank = PrototypeBank(
            text_embeds=np.asarray(bank_spec["text_embeds"], dtype=np.float64),
            class_scales=None if bank_spec.get("class_scales") is None
            else np.asarray(bank_spec["class_scales"], dtype=np.float64),
        )
    else:
        bank = make_prototype_bank(
            K=int(bank_spec["K"]), d=int(bank_spec["d"]),
            seed=int(bank_spec.get("seed", 0)),
            max_pairwise_cos=float(bank_spec.get("max_pairwise_cos", 0.5)),
            with_scales=bool(bank_spec.get("with_scales",
                                           obj["task"] == "detection")),
        )
    shift_spec = obj["shift"]
    shift = ShiftSpec(
        prior_skew=np.asarray(shift_spec["prior_skew"], dtype=np.float64),
        prototype_drift=float(shift_spec.get("prototype_drift", 0.0)),
        noise_sigma=float(shift_spec.get("noise_sigma", 0.0)),
        scale_jitter=float(shift_spec.get("scale_jitter", 0.0)),
        background_rate=float(shift_spec.get("background_rate", 0.0)),
        seed=int(shift_spec.get("seed", 0)),
    )
    return {
        "task": obj["task"],
        "n_images": int(obj["n_images"]),
        "proposals_per_image": int(obj.get("proposals_per_image", 1)),
        "class_names": obj.get("class_names"),
        "precision": obj.get("precision", "f64"),
        "encoding": obj.get("encoding", "jsonl"),
        "bank": bank,
        "shift": shift,
    }
