"""Policy zoo: scripted demonstration experts and behavior-cloned networks.

Every evaluated policy is a small frame-conditioned network exposing the
latent-action hook: ``act`` returns the pre-decoder embedding alongside the
decoded action chunk, and decoding that embedding reproduces the chunk
exactly. Scripted controllers exist only to generate demonstrations.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .config import RunConfig, derive_seed
from .core import (
    ActionChunk,
    ActionVector,
    Episode,
    Frame,
    Instruction,
    LatentAction,
    ValidationError,
)
from .nn import Params
from .world import (
    HOME_LEFT,
    HOME_RIGHT,
    TaskSpec,
    WorldState,
    reset,
    run_real_episode,
    snap,
    step,
    within,
)


class UnsupportedTaskError(ValueError):
    pass


class DemoBudgetError(RuntimeError):
    """collect_demos exceeded its resampling budget before reaching n successes."""


@dataclass
class BCConfig:
    fc_hidden: int = 256
    latent_dim: int = 32
    learning_rate: float = 2e-3
    epochs: int = 60
    batch_size: int = 64
    window_stride: int = 1
    seed: int = 0
    checkpoint_steps: tuple[int, ...] = ()

    def __post_init__(self):
        steps = tuple(self.checkpoint_steps)
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValidationError("checkpoint_steps must be strictly increasing")
        self.checkpoint_steps = steps


# -- network definition -------------------------------------------------------
#
# Fixed palette-keypoint front-end (frozen visual encoder): every pixel is
# assigned to its nearest scene color, and each color channel contributes a
# presence weight plus blob centroid. The learned part is an MLP from those
# keypoints and the instruction embedding through hidden layers to the latent
# z, with a linear action decoder on top.

from .world import PALETTE

PALETTE_ORDER = tuple(PALETTE)
_PALETTE_ARR = np.array([PALETTE[k] for k in PALETTE_ORDER], dtype=np.float64)
# grip-agnostic arm-position channels: an arm stays visible to the policy as
# one keypoint whether its marker shows the open or the closed color
_UNION_GROUPS = (
    ("arm_left_open", "arm_left_closed"),
    ("arm_right_open", "arm_right_closed"),
)
_UNION_IDX = tuple(
    tuple(PALETTE_ORDER.index(name) for name in group) for group in _UNION_GROUPS
)
KEYPOINT_DIM = 3 * (len(PALETTE_ORDER) + len(_UNION_GROUPS))
_PRESENCE_SATURATION = 32  # pixel count at which a channel reads fully present


def palette_keypoints(pixels: np.ndarray) -> np.ndarray:
    """(res, res, 3) uint8 -> keypoint features: presence, x, y per channel.

    Channels are the scene colors plus a grip-agnostic union per arm.
    Nearest-color assignment tolerates the soft edges of generated frames;
    empty channels report zero presence at the frame center.
    """
    res = pixels.shape[0]
    flat = pixels.reshape(-1, 3).astype(np.float64)
    d2 = ((flat[:, None, :] - _PALETTE_ARR[None, :, :]) ** 2).sum(axis=2)
    assign = d2.argmin(axis=1)
    cols = np.tile(np.arange(res, dtype=np.float64), res)
    rows = np.repeat(np.arange(res, dtype=np.float64), res)
    n_colors = _PALETTE_ARR.shape[0]
    counts = np.bincount(assign, minlength=n_colors).astype(np.float64)
    sx = np.bincount(assign, weights=cols, minlength=n_colors)
    sy = np.bincount(assign, weights=rows, minlength=n_colors)
    for group in _UNION_IDX:
        counts = np.append(counts, sum(counts[i] for i in group))
        sx = np.append(sx, sum(sx[i] for i in group))
        sy = np.append(sy, sum(sy[i] for i in group))
    present = counts > 0
    x = np.where(present, (sx / np.maximum(counts, 1) + 0.5) / res, 0.5)
    y = np.where(present, (sy / np.maximum(counts, 1) + 0.5) / res, 0.5)
    presence = np.minimum(counts / _PRESENCE_SATURATION, 1.0)
    return np.concatenate([presence, x, y])


def init_policy_params(cfg: RunConfig, bc: BCConfig, seed: int) -> Params:
    rng = np.random.default_rng(np.random.PCG64(seed))
    feat = KEYPOINT_DIM + cfg.lang_dim
    out = cfg.chunk_len * 6
    return {
        "fc1_w": nn.glorot(rng, feat, bc.fc_hidden),
        "fc1_b": nn.zeros(bc.fc_hidden),
        "fc2_w": nn.glorot(rng, bc.fc_hidden, bc.fc_hidden),
        "fc2_b": nn.zeros(bc.fc_hidden),
        "lat_w": nn.glorot(rng, bc.fc_hidden, bc.latent_dim),
        "lat_b": nn.zeros(bc.latent_dim),
        "dec_w": nn.glorot(rng, bc.latent_dim, out),
        "dec_b": nn.zeros(out),
    }


def policy_forward(params: Params, keypoints: np.ndarray, lang: np.ndarray) -> dict:
    """Batched forward pass on precomputed keypoint features."""
    feat = np.concatenate([keypoints, lang], axis=1)
    h1 = np.tanh(feat @ params["fc1_w"] + params["fc1_b"])
    h2 = np.tanh(h1 @ params["fc2_w"] + params["fc2_b"])
    z = h2 @ params["lat_w"] + params["lat_b"]
    raw = z @ params["dec_w"] + params["dec_b"]
    return {"feat": feat, "h1": h1, "h2": h2, "z": z, "raw": raw}


def policy_loss_and_grads(params: Params, keypoints: np.ndarray, lang: np.ndarray,
                          targets: np.ndarray) -> tuple[float, Params]:
    """MSE on raw decoder outputs with full analytic backprop."""
    cache = policy_forward(params, keypoints, lang)
    diff = cache["raw"] - targets
    loss = float(np.mean(diff * diff))

    d_raw = (2.0 / diff.size) * diff
    grads: Params = {}
    grads["dec_w"] = cache["z"].T @ d_raw
    grads["dec_b"] = d_raw.sum(axis=0)
    d_z = d_raw @ params["dec_w"].T
    grads["lat_w"] = cache["h2"].T @ d_z
    grads["lat_b"] = d_z.sum(axis=0)
    d_h2 = nn.tanh_backward(d_z @ params["lat_w"].T, cache["h2"])
    grads["fc2_w"] = cache["h1"].T @ d_h2
    grads["fc2_b"] = d_h2.sum(axis=0)
    d_h1 = nn.tanh_backward(d_h2 @ params["fc2_w"].T, cache["h1"])
    grads["fc1_w"] = cache["feat"].T @ d_h1
    grads["fc1_b"] = d_h1.sum(axis=0)
    return loss, grads


@dataclass
class Policy:
    """A trained (or corrupted) behavior-cloning policy."""

    policy_id: str
    params: Params
    cfg: RunConfig
    bc: BCConfig

    def decode_chunk(self, latent: np.ndarray) -> ActionChunk:
        """The action decoder: linear map in normalized units, then denorm + clip.

        The network regresses deltas in units of max_step so every action
        dimension carries comparable loss weight.
        """
        raw = latent @ self.params["dec_w"] + self.params["dec_b"]
        arr = raw.reshape(self.cfg.chunk_len, 6).copy()
        arr = np.clip(arr, -1.0, 1.0)
        arr[:, [0, 1, 3, 4]] *= self.cfg.max_step
        return ActionChunk.from_array(arr)

    def act(self, frame: Frame, proprio, instruction: Instruction
            ) -> tuple[ActionChunk, LatentAction]:
        if frame.width != self.cfg.resolution:
            raise ValidationError(
                f"policy {self.policy_id}: frame resolution {frame.width} != "
                f"{self.cfg.resolution}"
            )
        keypoints = palette_keypoints(frame.pixels)
        cache = policy_forward(self.params, keypoints[None], instruction.embedding[None])
        z = cache["z"][0]
        return self.decode_chunk(z), LatentAction(z, self.policy_id, 0)

    def save(self, base: Path | str) -> None:
        meta = {
            "policy_id": self.policy_id,
            "run_config": dataclasses.asdict(self.cfg),
            "bc_config": dataclasses.asdict(self.bc),
        }
        meta["bc_config"]["checkpoint_steps"] = list(self.bc.checkpoint_steps)
        nn.save_params(base, self.params, meta)


def load_policy(base: Path | str) -> Policy:
    params, meta = nn.load_params(base)
    bc_kwargs = dict(meta["bc_config"])
    bc_kwargs["checkpoint_steps"] = tuple(bc_kwargs.get("checkpoint_steps", ()))
    return Policy(
        policy_id=meta["policy_id"],
        params=params,
        cfg=RunConfig(**meta["run_config"]),
        bc=BCConfig(**bc_kwargs),
    )


# -- behavior cloning ---------------------------------------------------------


def build_bc_dataset(demos: list[Episode], cfg: RunConfig, window_stride: int = 1
                     ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sliding-window dataset: (keypoint features, instruction embeddings, targets).

    Every stride-th step of a demo yields one sample whose target is the next
    H expert actions, so the policy trains on states at all phase offsets, not
    just its own chunk boundaries. Targets are in the decoder's normalized
    units: deltas divided by max_step, grips as-is, so all six action
    dimensions regress on the same scale.
    """
    if not demos:
        raise ValidationError("behavior cloning needs at least one demo")
    feats, langs, targets = [], [], []
    for ep in demos:
        h = ep.horizon
        all_actions = np.concatenate([chunk.as_array() for chunk, _ in ep.chunks])
        all_actions[:, [0, 1, 3, 4]] /= cfg.max_step
        n_steps = all_actions.shape[0]
        for t in range(0, n_steps - h + 1, window_stride):
            feats.append(palette_keypoints(ep.frames[t].pixels))
            langs.append(ep.instruction.embedding)
            targets.append(all_actions[t:t + h].reshape(-1))
    return np.stack(feats), np.stack(langs), np.stack(targets)


@dataclass
class Checkpoint:
    step: int
    loss: float
    params: Params


@dataclass
class BCResult:
    policy: Policy
    loss_initial: float
    loss_final: float
    checkpoints: list[Checkpoint]


def train_bc(demos: list[Episode], bc: BCConfig, cfg: RunConfig | None = None,
             policy_id: str = "bc", out_dir: Path | str | None = None) -> BCResult:
    """Behavior-clone the demos; optionally persist checkpoints and the model.

    Deterministic in (demos, config): same seed, same weights. Raises
    DivergenceError if the loss goes non-finite and records full-dataset loss
    at every checkpoint step.
    """
    cfg = cfg or RunConfig()
    feats, langs, targets = build_bc_dataset(demos, cfg, bc.window_stride)
    n = feats.shape[0]
    params = init_policy_params(cfg, bc, bc.seed)
    rng = np.random.default_rng(np.random.PCG64(derive_seed("bc-shuffle", bc.seed)))

    def full_loss() -> float:
        cache = policy_forward(params, feats, langs)
        d = cache["raw"] - targets
        return float(np.mean(d * d))

    loss_initial = full_loss()
    checkpoints: list[Checkpoint] = []
    pending = list(bc.checkpoint_steps)
    adam = nn.Adam(params, lr=bc.learning_rate)
    total_steps = bc.epochs * max(1, (n + bc.batch_size - 1) // bc.batch_size)
    global_step = 0
    for _ in range(bc.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, bc.batch_size):
            idx = order[lo:lo + bc.batch_size]
            loss, grads = policy_loss_and_grads(params, feats[idx], langs[idx], targets[idx])
            if not np.isfinite(loss):
                raise nn.DivergenceError(global_step)
            # cosine decay to 5% of the base rate settles late training
            frac = global_step / total_steps
            adam.lr = bc.learning_rate * (0.05 + 0.95 * 0.5 * (1 + np.cos(np.pi * frac)))
            adam.step(grads)
            global_step += 1
            if pending and global_step >= pending[0]:
                pending.pop(0)
                checkpoints.append(
                    Checkpoint(global_step, full_loss(), {k: v.copy() for k, v in params.items()})
                )
    loss_final = full_loss()
    policy = Policy(policy_id, params, cfg, bc)
    if out_dir is not None:
        out_dir = Path(out_dir)
        policy.save(out_dir / "model")
        for ck in checkpoints:
            ck_policy = Policy(f"{policy_id}-step{ck.step}", ck.params, cfg, bc)
            ck_policy.save(out_dir / "checkpoints" / f"step_{ck.step:06d}")
        _write_training_meta(out_dir, policy_id, loss_initial, loss_final, checkpoints)
    return BCResult(policy, loss_initial, loss_final, checkpoints)


def _write_training_meta(out_dir: Path, policy_id: str, loss_initial: float,
                         loss_final: float, checkpoints: list[Checkpoint]) -> None:
    import json

    meta = {
        "policy_id": policy_id,
        "loss_initial": loss_initial,
        "loss_final": loss_final,
        "checkpoints": [{"step": c.step, "loss": c.loss} for c in checkpoints],
    }
    (out_dir / "training.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def corrupt_policy(policy: Policy, mode: str, *, sigma: float = 0.05, seed: int = 0,
                   checkpoints: list[Checkpoint] | None = None,
                   checkpoint_step: int | None = None) -> Policy:
    """Degraded variants: fresh random weights, noisy weights, or an earlier checkpoint."""
    if mode == "random_weights":
        params = init_policy_params(
            policy.cfg, policy.bc, derive_seed("random-weights", policy.policy_id, seed)
        )
        return Policy(f"{policy.policy_id}-rand", params, policy.cfg, policy.bc)
    if mode == "noise":
        rng = np.random.default_rng(
            np.random.PCG64(derive_seed("weight-noise", policy.policy_id, seed))
        )
        params = {k: v + rng.normal(0.0, sigma, size=v.shape) for k, v in policy.params.items()}
        return Policy(f"{policy.policy_id}-noise{sigma:g}", params, policy.cfg, policy.bc)
    if mode == "truncated":
        if not checkpoints or checkpoint_step is None:
            raise ValidationError("truncated mode needs checkpoints and checkpoint_step")
        for ck in checkpoints:
            if ck.step == checkpoint_step:
                return Policy(
                    f"{policy.policy_id}-step{ck.step}",
                    {k: v.copy() for k, v in ck.params.items()},
                    policy.cfg, policy.bc,
                )
        raise ValidationError(f"no checkpoint at step {checkpoint_step}")
    raise ValidationError(f"unknown corruption mode {mode!r}")


# -- scripted experts ---------------------------------------------------------


def _toward(pos: tuple[float, float], target: tuple[float, float], max_step: float
            ) -> tuple[float, float]:
    return (
        float(np.clip(target[0] - pos[0], -max_step, max_step)),
        float(np.clip(target[1] - pos[1], -max_step, max_step)),
    )


class ScriptedExpert:
    """Waypoint proportional controller used to generate demonstrations.

    The expert reconstructs the start state from (task, seed) and dead-reckons
    an internal copy of the simulator, so its plans are exact. A small seeded
    jitter on the emitted deltas (teleop-style hand noise) makes demos cover a
    tube around the nominal path; the controller replans each step, so the
    demos teach corrections and stay near-perfectly successful. It emits the
    all-zero latent: scripted controllers are not part of the evaluated pool.
    """

    def __init__(self, task: TaskSpec, cfg: RunConfig | None = None,
                 jitter: float = 0.012):
        if task.task_id not in _CONTROLLERS:
            raise UnsupportedTaskError(f"no scripted expert for task {task.task_id!r}")
        self.task = task
        self.cfg = cfg or RunConfig()
        self.jitter = jitter
        self.policy_id = f"expert-{task.task_id}"
        self._sim: WorldState | None = None
        self._rng: np.random.Generator | None = None

    def begin_episode(self, task: TaskSpec, seed: int, background_id: int = 0) -> None:
        self._sim = reset(task, seed, background_id, self.cfg)
        self._rng = np.random.default_rng(
            np.random.PCG64(derive_seed("teleop-jitter", task.task_id, seed))
        )

    def act(self, frame: Frame, proprio, instruction: Instruction
            ) -> tuple[ActionChunk, LatentAction]:
        if self._sim is None:
            raise ValidationError("expert.act called before begin_episode")
        controller = _CONTROLLERS[self.task.task_id]
        actions = []
        for _ in range(self.cfg.chunk_len):
            action = controller(self._sim, self.task, self.cfg)
            if self.jitter > 0.0:
                v = action.values.copy()
                deltas = v[[0, 1, 3, 4]]
                # full jitter while cruising, a fine wobble on approach steps,
                # none while holding still: arrivals land inside the trigger
                # balls rather than on exact waypoints, so the demos cover the
                # near-miss states a cloned policy actually visits
                scale = np.where(
                    np.abs(deltas) >= self.cfg.max_step / 2, self.jitter,
                    np.where(np.abs(deltas) > 0.0, self.jitter / 2.5, 0.0),
                )
                noise = self._rng.uniform(-1.0, 1.0, size=4) * scale
                v[[0, 1, 3, 4]] = np.clip(deltas + noise, -self.cfg.max_step, self.cfg.max_step)
                action = ActionVector(v)
            self._sim = step(self._sim, action, self.cfg)
            actions.append(action)
        latent = LatentAction(np.zeros(self.cfg.latent_dim), self.policy_id, 0)
        return ActionChunk(tuple(actions)), latent


def make_scripted_expert(task: TaskSpec, cfg: RunConfig | None = None,
                         jitter: float = 0.012) -> ScriptedExpert:
    return ScriptedExpert(task, cfg, jitter)


def _home(cfg: RunConfig) -> tuple[tuple[float, float], tuple[float, float]]:
    res = cfg.resolution
    return (
        (snap(HOME_LEFT[0], res), snap(HOME_LEFT[1], res)),
        (snap(HOME_RIGHT[0], res), snap(HOME_RIGHT[1], res)),
    )


def _action(left=(0.0, 0.0), gl=-1.0, right=(0.0, 0.0), gr=-1.0) -> ActionVector:
    return ActionVector(np.array([left[0], left[1], gl, right[0], right[1], gr]))


# Grip triggers fire anywhere inside a ball around the target rather than at
# the exact waypoint: the demos then label a whole region of near-miss states
# with a decisive grip change, which a cloned policy can actually reproduce.
_TRIGGER_RADIUS = 0.02


def _near(a: tuple[float, float], b: tuple[float, float], cfg: RunConfig) -> bool:
    return within(a, b, _TRIGGER_RADIUS, cfg.resolution)


def _fetch_arm(state: WorldState, task: TaskSpec, cfg: RunConfig, side: str,
               obj_id: str, zone_id: str) -> tuple[tuple[float, float], float]:
    """Generic pick-and-place arm program: grab obj, drop at zone center, go home."""
    res = cfg.resolution
    arm = state.arm_left if side == "left" else state.arm_right
    held = state.held_left if side == "left" else state.held_right
    home = _home(cfg)[0 if side == "left" else 1]
    obj = state.object_by_id(obj_id).position
    zone = state.object_by_id(zone_id).position
    if held == obj_id:
        if _near(arm, zone, cfg):
            return (0.0, 0.0), -1.0          # release onto the zone
        return _toward(arm, zone, cfg.max_step), 1.0
    if within(obj, zone, state.object_by_id(zone_id).radius, res):
        if _near(arm, home, cfg):
            return (0.0, 0.0), -1.0          # done, parked
        return _toward(arm, home, cfg.max_step), -1.0
    if _near(arm, obj, cfg):
        return (0.0, 0.0), 1.0               # close on the object
    return _toward(arm, obj, cfg.max_step), -1.0


def _ctrl_place_cup(state: WorldState, task: TaskSpec, cfg: RunConfig) -> ActionVector:
    right, gr = _fetch_arm(state, task, cfg, "right", "cup", "cup_mat")
    return _action(right=right, gr=gr)


def _ctrl_collect_toy(state: WorldState, task: TaskSpec, cfg: RunConfig) -> ActionVector:
    right, gr = _fetch_arm(state, task, cfg, "right", "toy", "tray_right")
    return _action(right=right, gr=gr)


def _ctrl_bussing(state: WorldState, task: TaskSpec, cfg: RunConfig) -> ActionVector:
    right, gr = _fetch_arm(state, task, cfg, "right", "plate", "tray")
    left, gl = _fetch_arm(state, task, cfg, "left", "trash", "bin")
    return _action(left=left, gl=gl, right=right, gr=gr)


def _ctrl_strike(state: WorldState, task: TaskSpec, cfg: RunConfig) -> ActionVector:
    res = cfg.resolution
    offset = 6 / (2 * res)  # park the hammer just left of the block, inside contact range
    target = state.object_by_id("strike_target").position
    strike_point = (snap(target[0] - offset, res), target[1])
    arm = state.arm_right
    if state.held_right == "hammer":
        if _near(arm, strike_point, cfg):
            return _action(right=(0.0, 0.0), gr=1.0)   # hold the strike pose
        return _action(right=_toward(arm, strike_point, cfg.max_step), gr=1.0)
    hammer = state.object_by_id("hammer").position
    if _near(arm, hammer, cfg):
        return _action(right=(0.0, 0.0), gr=1.0)
    return _action(right=_toward(arm, hammer, cfg.max_step), gr=-1.0)


def _ctrl_handover(state: WorldState, task: TaskSpec, cfg: RunConfig) -> ActionVector:
    res = cfg.resolution
    hand_left = (snap(60 / 128, res), snap(64 / 128, res))
    hand_right = (snap(64 / 128, res), snap(64 / 128, res))
    home_l, home_r = _home(cfg)
    block = state.object_by_id("block").position
    zone = state.object_by_id("target_mat").position

    if state.held_right == "block":
        # right arm carries to the target mat, left retreats home
        gl_move = _toward(state.arm_left, home_l, cfg.max_step)
        if _near(state.arm_right, zone, cfg):
            return _action(left=gl_move, gl=-1.0, right=(0.0, 0.0), gr=-1.0)
        return _action(left=gl_move, gl=-1.0,
                       right=_toward(state.arm_right, zone, cfg.max_step), gr=1.0)
    if state.held_left == "block":
        # left carries to the rendezvous and holds; right stages at its own
        # point, then closes in on the block; the transfer (left opens, right
        # closes) fires in one step once the right arm is inside grasp range.
        left_ready = _near(state.arm_left, hand_left, cfg)
        if not left_ready:
            return _action(left=_toward(state.arm_left, hand_left, cfg.max_step), gl=1.0,
                           right=_toward(state.arm_right, hand_right, cfg.max_step), gr=-1.0)
        if within(state.arm_right, block, 0.034, res):
            return _action(left=(0.0, 0.0), gl=-1.0, right=(0.0, 0.0), gr=1.0)
        return _action(left=(0.0, 0.0), gl=1.0,
                       right=_toward(state.arm_right, block, cfg.max_step), gr=-1.0)
    if state.latch_right_after_left:
        # placed; retreat both arms
        gl_move = _toward(state.arm_left, home_l, cfg.max_step)
        gr_move = _toward(state.arm_right, home_r, cfg.max_step)
        return _action(left=gl_move, gl=-1.0, right=gr_move, gr=-1.0)
    # nothing held yet: left goes for the block, right pre-positions
    if _near(state.arm_left, block, cfg):
        return _action(left=(0.0, 0.0), gl=1.0,
                       right=_toward(state.arm_right, hand_right, cfg.max_step), gr=-1.0)
    return _action(left=_toward(state.arm_left, block, cfg.max_step), gl=-1.0,
                   right=_toward(state.arm_right, hand_right, cfg.max_step), gr=-1.0)


_CONTROLLERS = {
    "place_cup": _ctrl_place_cup,
    "handover_block": _ctrl_handover,
    "strike_block": _ctrl_strike,
    "bussing_table": _ctrl_bussing,
    "collect_toy": _ctrl_collect_toy,
}


def collect_demos(controller, task: TaskSpec, n_episodes: int, seed: int,
                  cfg: RunConfig | None = None, background_id: int = 0) -> list[Episode]:
    """n successful expert episodes; failed rollouts are resampled, capped at 3n."""
    if n_episodes < 1:
        raise ValidationError("n_episodes must be >= 1")
    cfg = cfg or RunConfig()
    demos: list[Episode] = []
    attempts = 0
    while len(demos) < n_episodes:
        if attempts >= 3 * n_episodes:
            raise DemoBudgetError(
                f"{task.task_id}: only {len(demos)}/{n_episodes} successes in {attempts} attempts"
            )
        ep_seed = derive_seed("demo", task.task_id, seed, attempts)
        episode = run_real_episode(controller, task, ep_seed, cfg.episode_len,
                                   cfg.chunk_len, background_id, cfg)
        attempts += 1
        if episode.success_ground_truth == 1:
            demos.append(episode)
    return demos
