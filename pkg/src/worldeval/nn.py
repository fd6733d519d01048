"""Small dense-network toolkit: hand-rolled layers, Adam, and weight-file IO.

Everything runs on float64 so training is bit-reproducible for a fixed seed
and analytic gradients can be checked against central finite differences
without dtype noise. Models are plain dicts of named arrays; each model
module implements its own forward/backward pair on top of these helpers.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

Params = dict[str, np.ndarray]


class DivergenceError(RuntimeError):
    """Raised when a training loss becomes non-finite."""

    def __init__(self, step: int):
        super().__init__(f"loss became non-finite at step {step}")
        self.step = step


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    scale = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, scale, size=(fan_in, fan_out))


def zeros(*shape: int) -> np.ndarray:
    return np.zeros(shape, dtype=np.float64)


def tanh_backward(grad_out: np.ndarray, activated: np.ndarray) -> np.ndarray:
    return grad_out * (1.0 - activated * activated)


class Adam:
    """Plain Adam over a parameter dict. State keys mirror parameter keys."""

    def __init__(self, params: Params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(v) for k, v in params.items()}
        self._v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: Params, skip: set[str] | None = None) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for key, g in grads.items():
            if skip and key in skip:
                continue
            m = self._m[key]
            v = self._v[key]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            self.params[key] -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def patchify(frames_f: np.ndarray, patch: int = 8) -> np.ndarray:
    """(B, res, res, 3) float -> (B, n_patches, patch*patch*3), row-major patches."""
    b, res, _, _ = frames_f.shape
    g = res // patch
    x = frames_f.reshape(b, g, patch, g, patch, 3)
    x = x.transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(b, g * g, patch * patch * 3)


def unpatchify(patches: np.ndarray, res: int, patch: int = 8) -> np.ndarray:
    """Inverse of patchify: (B, n_patches, patch*patch*3) -> (B, res, res, 3)."""
    b = patches.shape[0]
    g = res // patch
    x = patches.reshape(b, g, g, patch, patch, 3)
    x = x.transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(b, res, res, 3)


def save_params(base: Path | str, params: Params, meta: dict) -> None:
    """Write a flat float64 weight file plus a JSON shape/metadata manifest.

    Arrays are concatenated in sorted key order, little-endian, so the pair
    of files is a deterministic function of the weights and metadata.
    """
    base = Path(base)
    base.parent.mkdir(parents=True, exist_ok=True)
    keys = sorted(params)
    blob = b"".join(np.ascontiguousarray(params[k], dtype="<f8").tobytes() for k in keys)
    base.with_suffix(".bin").write_bytes(blob)
    manifest = {
        "format": "worldeval-weights-v1",
        "shapes": {k: list(params[k].shape) for k in keys},
        "meta": meta,
    }
    base.with_suffix(".json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_params(base: Path | str) -> tuple[Params, dict]:
    base = Path(base)
    manifest = json.loads(base.with_suffix(".json").read_text(encoding="utf-8"))
    blob = base.with_suffix(".bin").read_bytes()
    params: Params = {}
    offset = 0
    for key in sorted(manifest["shapes"]):
        shape = tuple(manifest["shapes"][key])
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).reshape(shape)
        params[key] = arr.copy()
        offset += n * 8
    if offset != len(blob):
        raise ValueError(f"weight file {base.with_suffix('.bin')} has trailing bytes")
    return params, manifest["meta"]
