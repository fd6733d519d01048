"""Global numeric knobs shared across the simulator, policies, and models."""

from __future__ import annotations

import dataclasses
import hashlib
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class RunConfig:
    """Default dimensions and physical constants of the desk-scale setup.

    Every field is overridable from the ``[run]`` table of a TOML config
    file; ops take an explicit ``cfg`` so nothing reads hidden globals.
    """

    resolution: int = 64            # frame edge, pixels
    max_step: float = 0.05          # per-axis arm delta clip, table lengths
    grasp_radius: float = 0.04      # attach distance for a closing grip
    chunk_len: int = 8              # H, actions per policy call
    episode_len: int = 41           # K, frames per episode (1 + H * chunks)
    latent_dim: int = 32            # d_z, policy latent action size
    lang_dim: int = 32              # d_lang, instruction embedding size
    state_dim: int = 64             # d_s, world-model latent state size
    feature_dim: int = 64           # d_f, FID feature size
    onehot_deadband: float = 0.01   # |value| below this counts as "no motion"
    vq_num_codes: int = 64
    vq_code_dim: int = 32
    vq_beta: float = 0.25
    samples_per_trajectory: int = 3
    gen_zone_tol_px: float = 2.0    # zone-test slack on generated frames
    gen_color_tol: float = 25.0     # nearest-palette acceptance on generated frames

    @property
    def chunks_per_episode(self) -> int:
        return (self.episode_len - 1) // self.chunk_len

    def validate(self) -> None:
        if (self.episode_len - 1) % self.chunk_len != 0:
            raise ValueError(
                f"episode_len-1 ({self.episode_len - 1}) must be divisible by "
                f"chunk_len ({self.chunk_len})"
            )
        if self.resolution % 8 != 0:
            raise ValueError("resolution must be a multiple of 8")


def load_run_config(path: Path | str | None) -> RunConfig:
    """RunConfig from the [run] table of a TOML file; defaults if path is None."""
    if path is None:
        cfg = RunConfig()
    else:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        table = data.get("run", {})
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(table) - known
        if unknown:
            raise ValueError(f"unknown [run] keys: {sorted(unknown)}")
        cfg = RunConfig(**table)
    cfg.validate()
    return cfg


def config_hash(cfg: RunConfig) -> str:
    payload = repr(sorted(dataclasses.asdict(cfg).items())).encode()
    return hashlib.blake2b(payload, digest_size=8).hexdigest()


def derive_seed(*parts) -> int:
    """Deterministic 63-bit stream seed from arbitrary labeled parts."""
    text = "/".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") & 0x7FFF_FFFF_FFFF_FFFF
