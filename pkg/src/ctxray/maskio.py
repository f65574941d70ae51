"""Mask archives: JSON index plus run-length-encoded binary payloads.

One archive holds the per-class binary masks of a single projection
(``kind: mask2d``) or of a label volume (``kind: labels3d``). The index
file ``<stem>.json`` records class names, dims and provenance; the
sibling ``<stem>.rle`` concatenates the per-class payloads. A payload
is a sequence of little-endian uint32 run lengths over the C-order
flattened mask, alternating background/foreground and starting with a
(possibly zero-length) background run.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ArgumentError, FormatError
from .projection import MaskSet2D
from .volume import DEFAULT_ORIENTATION, LabelVolume

FORMAT_NAME = "ctxray-mask-archive"


def encode_rle(mask: np.ndarray) -> bytes:
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return b""
    change = np.nonzero(flat[1:] != flat[:-1])[0] + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds)
    if flat[0]:
        runs = np.concatenate(([0], runs))
    return runs.astype("<u4").tobytes()


def decode_rle(payload: bytes, size: int) -> np.ndarray:
    runs = np.frombuffer(payload, dtype="<u4").astype(np.int64)
    if int(runs.sum()) != size:
        raise FormatError(
            f"run lengths sum to {int(runs.sum())}, expected {size} elements"
        )
    out = np.zeros(size, dtype=bool)
    ends = np.cumsum(runs)
    starts = ends - runs
    for s, e in zip(starts[1::2], ends[1::2]):
        out[s:e] = True
    return out


def _write_archive(stem: Path, kind: str, dims, masks: dict, extra: dict,
                   derived: set) -> tuple[Path, Path]:
    index_path = stem.with_suffix(".json")
    rle_path = stem.with_suffix(".rle")
    entries = []
    blob = bytearray()
    for name, mask in masks.items():
        payload = encode_rle(mask)
        entries.append(
            {
                "name": name,
                "offset": len(blob),
                "length": len(payload),
                "foreground": int(np.count_nonzero(mask)),
                "derived": name in derived,
            }
        )
        blob.extend(payload)
    index = {
        "format": FORMAT_NAME,
        "version": 1,
        "kind": kind,
        "dims": list(int(d) for d in dims),
        "payload": rle_path.name,
        "classes": entries,
    }
    index.update(extra)
    index_path.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    rle_path.write_bytes(bytes(blob))
    return index_path, rle_path


def _read_archive(index_path: Path, kind: str):
    index_path = Path(index_path)
    try:
        index = json.loads(index_path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{index_path}: malformed JSON index: {e}") from e
    if index.get("format") != FORMAT_NAME:
        raise FormatError(f"{index_path}: not a {FORMAT_NAME} index")
    if index.get("kind") != kind:
        raise FormatError(
            f"{index_path}: archive kind {index.get('kind')!r}, expected {kind!r}"
        )
    dims = tuple(int(d) for d in index["dims"])
    blob = index_path.with_name(index["payload"]).read_bytes()
    size = int(np.prod(dims))
    masks = {}
    derived = set()
    for entry in index["classes"]:
        payload = blob[entry["offset"] : entry["offset"] + entry["length"]]
        if len(payload) != entry["length"]:
            raise FormatError(
                f"{index_path}: payload for {entry['name']!r} truncated"
            )
        masks[entry["name"]] = decode_rle(payload, size).reshape(dims)
        if entry.get("derived"):
            derived.add(entry["name"])
    return index, masks, derived


def save_maskset(maskset: MaskSet2D, stem) -> tuple[Path, Path]:
    """Write a 2D mask archive; returns (index path, payload path)."""
    if maskset.dims is None:
        raise ArgumentError("cannot save a mask set without classes")
    extra = {"view": maskset.view, "source_id": maskset.source_id}
    return _write_archive(
        Path(stem), "mask2d", maskset.dims, maskset.masks, extra, maskset.derived
    )


def load_maskset(index_path) -> MaskSet2D:
    index, masks, derived = _read_archive(Path(index_path), "mask2d")
    return MaskSet2D(masks, index["view"], index.get("source_id", ""), derived)


def save_labelvolume(labels: LabelVolume, stem) -> tuple[Path, Path]:
    """Write a 3D label archive; returns (index path, payload path)."""
    extra = {
        "spacing": list(labels.spacing),
        "orientation": list(labels.orientation),
    }
    masks = {name: labels.masks[name] for name in labels.classes}
    return _write_archive(Path(stem), "labels3d", labels.dims, masks, extra, set())


def load_labelvolume(index_path) -> LabelVolume:
    index, masks, _ = _read_archive(Path(index_path), "labels3d")
    orientation = tuple(index.get("orientation", DEFAULT_ORIENTATION))
    return LabelVolume(
        tuple(masks), masks, tuple(float(s) for s in index["spacing"]), orientation
    )


def save_png(image: np.ndarray, path) -> None:
    """Write an 8-bit grayscale PNG."""
    if image.dtype != np.uint8 or image.ndim != 2:
        raise ArgumentError("PNG export expects a 2D uint8 array")
    Image.fromarray(image, mode="L").save(Path(path), format="PNG")


def load_png(path) -> np.ndarray:
    with Image.open(Path(path)) as im:
        return np.asarray(im.convert("L"))


def export_mask_pngs(maskset: MaskSet2D, directory, prefix: str = "") -> list:
    """One 8-bit PNG per class (0/255); returns written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, mask in maskset.masks.items():
        path = directory / f"{prefix}{name}.png"
        save_png((mask.astype(np.uint8) * 255), path)
        paths.append(path)
    return paths
