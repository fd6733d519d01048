"""Domain types, deterministic serialization, and content hashing.

Frames, actions, latents, instructions, episodes, and rollout records are
immutable value objects validated at construction. Episodes serialize to a
directory of PNG frames plus two JSON files whose bytes are a pure function
of the episode content, so round trips are bit-exact and cacheable.
"""

from __future__ import annotations

import hashlib
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

SOURCE_REAL = "real"
SOURCE_WORLDMODEL = "worldmodel"

ACTION_DIM = 6  # (dx, dy, grip) for the left arm then the right arm


class ValidationError(ValueError):
    """A domain invariant was violated; the message names the field."""


class ParseError(ValueError):
    """An on-disk artifact is missing, truncated, or inconsistent."""


def _require_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise ValidationError(f"{what} contains NaN or Inf")


@dataclass(frozen=True)
class Frame:
    """One square RGB image, 8 bits per channel, row-major."""

    pixels: np.ndarray  # (res, res, 3) uint8

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValidationError(f"pixels must be (h, w, 3), got {p.shape}")
        if p.shape[0] != p.shape[1]:
            raise ValidationError(f"pixels must be square, got {p.shape[:2]}")
        if p.dtype != np.uint8:
            raise ValidationError(f"pixels must be uint8, got {p.dtype}")
        p.setflags(write=False)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def as_float(self) -> np.ndarray:
        """Pixels mapped to [-0.5, 0.5] float64, the network input range."""
        return self.pixels.astype(np.float64) / 255.0 - 0.5

    def __eq__(self, other):
        return isinstance(other, Frame) and np.array_equal(self.pixels, other.pixels)


def frame_from_float(values: np.ndarray) -> Frame:
    """Quantize a [-0.5, 0.5] float image back to a Frame."""
    px = np.clip(np.rint((values + 0.5) * 255.0), 0, 255).astype(np.uint8)
    return Frame(px)


@dataclass(frozen=True)
class ActionVector:
    """Per-arm planar deltas plus grip commands: (dxL, dyL, gL, dxR, dyR, gR).

    Grip is continuous in [-1, 1]; values above 0 command a closed gripper.
    Deltas are clipped to max_step by the simulator, so construction only
    checks shape, finiteness, and the grip range.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (ACTION_DIM,):
            raise ValidationError(f"action must have dimension {ACTION_DIM}, got {v.shape}")
        _require_finite(v, "action")
        for idx in (2, 5):
            if abs(v[idx]) > 1.0:
                raise ValidationError(f"grip component {idx} = {v[idx]} outside [-1, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def clipped(self, max_step: float) -> "ActionVector":
        v = self.values.copy()
        for idx in (0, 1, 3, 4):
            v[idx] = float(np.clip(v[idx], -max_step, max_step))
        return ActionVector(v)


@dataclass(frozen=True)
class ActionChunk:
    """A fixed-horizon sequence of actions emitted by one policy call."""

    actions: tuple[ActionVector, ...]

    def __post_init__(self):
        if len(self.actions) < 1:
            raise ValidationError("chunk must contain at least one action")
        object.__setattr__(self, "actions", tuple(self.actions))

    def __len__(self) -> int:
        return len(self.actions)

    def as_array(self) -> np.ndarray:
        return np.stack([a.values for a in self.actions])

    @staticmethod
    def from_array(arr: np.ndarray) -> "ActionChunk":
        return ActionChunk(tuple(ActionVector(row) for row in np.asarray(arr, dtype=np.float64)))


@dataclass(frozen=True)
class LatentAction:
    """The policy's pre-decoder embedding for one action chunk."""

    values: np.ndarray
    source_policy: str
    chunk_index: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise ValidationError(f"latent must be a vector, got shape {v.shape}")
        _require_finite(v, "latent")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


_LANG_BUCKETS = 64
_LANG_PROJECTION_SEED = 0x1A06_7E3D
_lang_projection_cache: dict[int, np.ndarray] = {}


def _lang_projection(dim: int) -> np.ndarray:
    if dim not in _lang_projection_cache:
        rng = np.random.default_rng(_LANG_PROJECTION_SEED)
        _lang_projection_cache[dim] = rng.normal(
            0.0, 1.0 / np.sqrt(_LANG_BUCKETS), size=(_LANG_BUCKETS, dim)
        )
    return _lang_projection_cache[dim]


def embed_instruction(text: str, dim: int = 32) -> np.ndarray:
    """Deterministic instruction embedding: hashed token counts projected to dim.

    The projection matrix is seeded once per dimension, so the embedding is a
    pure function of the text with no learned state.
    """
    counts = np.zeros(_LANG_BUCKETS, dtype=np.float64)
    for token in re.findall(r"[a-z0-9]+", text.lower()):
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        counts[int.from_bytes(digest, "little") % _LANG_BUCKETS] += 1.0
    vec = counts @ _lang_projection(dim)
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0.0 else vec


@dataclass(frozen=True)
class Instruction:
    text: str
    embedding: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.embedding, dtype=np.float64)
        _require_finite(e, "instruction embedding")
        expected = embed_instruction(self.text, e.shape[0])
        if not np.array_equal(e, expected):
            raise ValidationError("instruction embedding does not match its text")
        e.setflags(write=False)
        object.__setattr__(self, "embedding", e)

    @staticmethod
    def from_text(text: str, dim: int = 32) -> "Instruction":
        return Instruction(text, embed_instruction(text, dim))


@dataclass(frozen=True)
class Episode:
    """One rollout: frames, actions, latents, and optional ground truth.

    Invariants: frame count K = 1 + H * len(chunks) with a uniform chunk
    horizon H, and proprio states are present exactly when source is real.
    """

    task_id: str
    policy_id: str
    seed: int
    source: str
    frames: tuple[Frame, ...]
    states: tuple[np.ndarray, ...] | None
    chunks: tuple[tuple[ActionChunk, LatentAction], ...]
    instruction: Instruction
    success_ground_truth: int | None = None

    def __post_init__(self):
        if self.source not in (SOURCE_REAL, SOURCE_WORLDMODEL):
            raise ValidationError(f"source must be real|worldmodel, got {self.source!r}")
        if not self.chunks:
            raise ValidationError("episode must contain at least one chunk")
        horizon = len(self.chunks[0][0])
        if any(len(c) != horizon for c, _ in self.chunks):
            raise ValidationError("all chunks must share one horizon")
        expected_k = 1 + horizon * len(self.chunks)
        if len(self.frames) != expected_k:
            raise ValidationError(
                f"frames: expected K = 1 + H*chunks = {expected_k}, got {len(self.frames)}"
            )
        res = self.frames[0].width
        if any(f.width != res or f.height != res for f in self.frames):
            raise ValidationError("frames: mixed resolutions")
        if self.source == SOURCE_REAL and self.states is None:
            raise ValidationError("states: required for real episodes")
        if self.source == SOURCE_WORLDMODEL and self.states is not None:
            raise ValidationError("states: must be absent for worldmodel episodes")
        if self.states is not None:
            if len(self.states) != len(self.frames):
                raise ValidationError("states: need one proprio vector per frame")
            states = tuple(np.asarray(s, dtype=np.float64) for s in self.states)
            for s in states:
                _require_finite(s, "state")
                s.setflags(write=False)
            object.__setattr__(self, "states", states)
        if self.success_ground_truth not in (None, 0, 1):
            raise ValidationError("success_ground_truth must be 0, 1, or None")
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "chunks", tuple(self.chunks))

    @property
    def horizon(self) -> int:
        return len(self.chunks[0][0])


@dataclass(frozen=True)
class RolloutRecord:
    """One evaluation trial as a results.jsonl row."""

    policy_id: str
    task_id: str
    seed: int
    source: str
    verdict_oracle: int
    verdict_vlm: int | None = None
    collapse_score: float = 0.0
    wall_time: float = 0.0
    error: str | None = None

    def __post_init__(self):
        if self.verdict_oracle not in (0, 1):
            raise ValidationError("verdict_oracle must be binary")
        if self.verdict_vlm not in (None, 0, 1):
            raise ValidationError("verdict_vlm must be binary or None")
        if not 0.0 <= self.collapse_score <= 1.0:
            raise ValidationError("collapse_score must be in [0, 1]")

    _KEYS = ("policy_id", "task_id", "seed", "source", "verdict_oracle",
             "verdict_vlm", "collapse_score", "wall_time", "error")

    def to_json_line(self) -> str:
        row = {k: getattr(self, k) for k in self._KEYS}
        return json.dumps(row, separators=(", ", ": "))

    @staticmethod
    def from_json_line(line: str) -> "RolloutRecord":
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad results line: {exc}") from exc
        return RolloutRecord(**{k: row[k] for k in RolloutRecord._KEYS})


def append_records(path: Path | str, records: Iterable[RolloutRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json_line() + "\n")


def read_records(path: Path | str) -> list[RolloutRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [RolloutRecord.from_json_line(line) for line in lines if line.strip()]


def content_hash(frames: Sequence[Frame]) -> str:
    """64-bit hex digest of the concatenated pixel bytes, nothing else."""
    if len(frames) == 0:
        raise ValidationError("content_hash requires a nonempty frame sequence")
    h = hashlib.blake2b(digest_size=8)
    for f in frames:
        h.update(f.pixels.tobytes())
    return h.hexdigest()


# -- episode directory layout ------------------------------------------------
#
#   <root>/<task_id>/<policy_id>/<seed>/frame_0000.png ... meta.json actions.json


def episode_dir(root: Path | str, task_id: str, policy_id: str, seed: int) -> Path:
    return Path(root) / task_id / policy_id / str(seed)


def _png_bytes(frame: Frame) -> bytes:
    img = Image.fromarray(frame.pixels, mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def write_episode(episode: Episode, root: Path | str) -> Path:
    """Serialize an episode beneath root; returns the episode directory.

    The payload files carry no timestamps, so identical episodes produce
    identical bytes on disk.
    """
    out = episode_dir(root, episode.task_id, episode.policy_id, episode.seed)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(episode.frames):
        (out / f"frame_{i:04d}.png").write_bytes(_png_bytes(frame))
    meta = {
        "task_id": episode.task_id,
        "policy_id": episode.policy_id,
        "seed": episode.seed,
        "source": episode.source,
        "instruction": episode.instruction.text,
        "lang_dim": int(episode.instruction.embedding.shape[0]),
        "H": episode.horizon,
        "K": len(episode.frames),
        "success": episode.success_ground_truth,
    }
    (out / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    actions = {
        "chunks": [chunk.as_array().tolist() for chunk, _ in episode.chunks],
        "latents": [lat.values.tolist() for _, lat in episode.chunks],
        "latent_chunk_index": [lat.chunk_index for _, lat in episode.chunks],
        "latent_source_policy": [lat.source_policy for _, lat in episode.chunks],
        "states": None if episode.states is None else [s.tolist() for s in episode.states],
    }
    (out / "actions.json").write_text(
        json.dumps(actions, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out


def read_episode(path: Path | str) -> Episode:
    """Inverse of write_episode; raises ParseError naming the offending file."""
    path = Path(path)
    meta_path = path / "meta.json"
    actions_path = path / "actions.json"
    for p in (meta_path, actions_path):
        if not p.exists():
            raise ParseError(f"missing file {p}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"corrupt {meta_path}: {exc}") from exc
    try:
        actions = json.loads(actions_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"corrupt {actions_path}: {exc}") from exc

    k = int(meta["K"])
    frames = []
    for i in range(k):
        fp = path / f"frame_{i:04d}.png"
        if not fp.exists():
            raise ParseError(f"meta.json says K={k} but {fp} is missing")
        try:
            with Image.open(fp) as img:
                frames.append(Frame(np.asarray(img.convert("RGB"), dtype=np.uint8)))
        except (OSError, SyntaxError) as exc:
            raise ParseError(f"corrupt frame file {fp}: {exc}") from exc

    chunks = []
    for idx, (chunk_vals, lat_vals) in enumerate(zip(actions["chunks"], actions["latents"])):
        chunk = ActionChunk.from_array(np.asarray(chunk_vals, dtype=np.float64))
        lat = LatentAction(
            np.asarray(lat_vals, dtype=np.float64),
            source_policy=actions["latent_source_policy"][idx],
            chunk_index=int(actions["latent_chunk_index"][idx]),
        )
        chunks.append((chunk, lat))

    states = actions.get("states")
    if states is not None:
        states = tuple(np.asarray(s, dtype=np.float64) for s in states)

    try:
        return Episode(
            task_id=meta["task_id"],
            policy_id=meta["policy_id"],
            seed=int(meta["seed"]),
            source=meta["source"],
            frames=tuple(frames),
            states=states,
            chunks=tuple(chunks),
            instruction=Instruction.from_text(meta["instruction"], int(meta["lang_dim"])),
            success_ground_truth=meta["success"],
        )
    except ValidationError as exc:
        raise ParseError(f"inconsistent episode at {path}: {exc}") from exc
