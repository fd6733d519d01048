"""Deterministic 2D tabletop simulator: dynamics, rendering, ground truth.

The world is kinematic: two point arms move by clipped per-axis deltas, a
closing grip within grasp range attaches the nearest free object, and held
objects track their arm until released. All positions live on the half-pixel
grid, so rendering, the geometric success function, and the pixel-space
verifier operate on exactly the same integer coordinates.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .core import (
    SOURCE_REAL,
    ActionChunk,
    ActionVector,
    Episode,
    Frame,
    Instruction,
    ValidationError,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# Scene colors on the {72, 132, 192}^3 lattice: every pair of distinct
# entries differs by at least 60 in L2, which keeps nearest-color object
# detection unambiguous and keeps within-patch variance of rendered frames
# well below that of iid noise (used by the collapse score calibration).
PALETTE: dict[str, tuple[int, int, int]] = {
    "bg_lab": (132, 132, 132),
    "bg_office": (72, 132, 132),
    "bg_living": (132, 132, 72),
    "bg_kitchen": (132, 192, 132),
    "arm_left_open": (72, 192, 192),
    "arm_left_closed": (72, 132, 72),
    "arm_right_open": (192, 192, 72),
    "arm_right_closed": (132, 72, 132),
    "held_ring": (192, 192, 192),
    "cup": (72, 72, 192),
    "cup_mat": (192, 132, 72),
    "block": (192, 72, 72),
    "target_mat": (72, 132, 192),
    "hammer": (132, 72, 72),
    "strike_target": (192, 72, 132),
    "plate": (72, 192, 72),
    "trash": (72, 72, 132),
    "tray": (192, 192, 132),
    "bin": (72, 72, 72),
    "toy": (192, 132, 192),
}

BACKGROUNDS = ("bg_lab", "bg_office", "bg_living", "bg_kitchen")

HOME_LEFT = (26 / 128, 64 / 128)
HOME_RIGHT = (102 / 128, 64 / 128)

ARM_HALF_PX = 2          # arm marker half-width in pixels
RING_GAP_PX = 2          # held ring sits this far outside the object
_MIN_SEPARATION = 0.02   # surface gap enforced by the sampler
_GOAL_MARGIN = 0.04      # reset states must miss goals by at least this
_HOME_CLEARANCE = 0.06   # objects spawn clear of the arm home poses
TASK_IDS = ("place_cup", "handover_block", "strike_block", "bussing_table", "collect_toy")


class SamplerError(RuntimeError):
    """Raised when reset cannot place objects within the attempt budget."""


@dataclass(frozen=True)
class Object:
    id: str
    shape: str                      # "disc" | "block"
    color: tuple[int, int, int]
    position: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.shape not in ("disc", "block"):
            raise ValidationError(f"object shape must be disc|block, got {self.shape!r}")
        if not 0.0 < self.radius <= 0.1:
            raise ValidationError(f"object radius must be in (0, 0.1], got {self.radius}")


@dataclass(frozen=True)
class WorldState:
    """Full simulator state, immutable. Latches make handover success Markovian."""

    arm_left: tuple[float, float]
    arm_right: tuple[float, float]
    grip_left: bool                 # True = closed
    grip_right: bool
    held_left: str | None
    held_right: str | None
    objects: tuple[Object, ...]
    background_id: int
    handover_object: str | None = None
    latch_left_held: bool = False
    latch_right_after_left: bool = False

    def __post_init__(self):
        colors = [o.color for o in self.objects]
        if len(set(colors)) != len(colors):
            raise ValidationError("object colors must be unique within a state")
        if self.held_left is not None and self.held_left == self.held_right:
            raise ValidationError("an object cannot be held by both arms")
        for pos in (self.arm_left, self.arm_right):
            if not (0.0 <= pos[0] <= 1.0 and 0.0 <= pos[1] <= 1.0):
                raise ValidationError(f"arm position {pos} outside [0,1]^2")
        for obj in self.objects:
            holder = None
            if obj.id == self.held_left:
                holder = self.arm_left
            elif obj.id == self.held_right:
                holder = self.arm_right
            if holder is not None and obj.position != holder:
                raise ValidationError(f"held object {obj.id} not at its arm position")

    def object_by_id(self, object_id: str) -> Object:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)

    def holder_of(self, object_id: str) -> str | None:
        if self.held_left == object_id:
            return "left"
        if self.held_right == object_id:
            return "right"
        return None


@dataclass(frozen=True)
class ObjectSpec:
    id: str
    shape: str
    color_name: str
    radius: float
    spawn: tuple[float, float, float, float]
    fixture: bool = False


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    instruction: Instruction
    objects: tuple[ObjectSpec, ...]
    success: dict

    def __post_init__(self):
        ids = {o.id for o in self.objects}
        for ref in _referenced_ids(self.success):
            if ref not in ids:
                raise ValidationError(
                    f"task {self.task_id}: success predicate references unknown object {ref!r}"
                )


def _referenced_ids(success: dict) -> list[str]:
    kind = success["kind"]
    if kind == "in_zone":
        return [i for pair in success["pairs"] for i in pair]
    if kind == "handover":
        return [success["object"], success["zone"]]
    if kind == "strike":
        return [success["tool"], success["target"]]
    raise ValidationError(f"unknown success kind {kind!r}")


_task_cache: dict[tuple, dict[str, TaskSpec]] = {}


def load_tasks(path: Path | str | None = None, lang_dim: int = 32) -> dict[str, TaskSpec]:
    """Task registry from a TOML file (the packaged tasks.toml by default)."""
    if path is None:
        path = Path(__file__).with_name("tasks.toml")
    key = (str(path), lang_dim)
    if key in _task_cache:
        return _task_cache[key]
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    tasks: dict[str, TaskSpec] = {}
    for task_id, body in raw.items():
        objects = tuple(
            ObjectSpec(
                id=o["id"],
                shape=o["shape"],
                color_name=o["color"],
                radius=float(o["radius"]),
                spawn=tuple(float(v) for v in o["spawn"]),
                fixture=bool(o.get("fixture", False)),
            )
            for o in body["objects"]
        )
        tasks[task_id] = TaskSpec(
            task_id=task_id,
            instruction=Instruction.from_text(body["instruction"], lang_dim),
            objects=objects,
            success=body["success"],
        )
    _task_cache[key] = tasks
    return tasks


# -- grid geometry -----------------------------------------------------------
#
# Positions are snapped to the half-pixel grid k/(2*res). Pixel centers sit at
# odd half-units, so a disc rendered at an on-grid position has a pixel
# centroid that inverts exactly back to the position.


def snap(x: float, res: int) -> float:
    return round(x * 2 * res) / (2 * res)


def to_half(x: float, res: int) -> int:
    return int(round(x * 2 * res))


def dist2_half(p: tuple[float, float], q: tuple[float, float], res: int) -> int:
    dx = to_half(p[0], res) - to_half(q[0], res)
    dy = to_half(p[1], res) - to_half(q[1], res)
    return dx * dx + dy * dy


def within(p: tuple[float, float], q: tuple[float, float], dist: float, res: int) -> bool:
    """Exact grid predicate: |p - q| <= dist, evaluated in integer half-units."""
    r = to_half(dist, res)
    return dist2_half(p, q, res) <= r * r


def reset(task: TaskSpec, seed: int, background_id: int = 0,
          cfg: RunConfig | None = None) -> WorldState:
    """Sample a start state: arms at home, objects placed without overlap.

    Deterministic in (task, seed, background_id). Sampled states never
    satisfy the task goal: movable goal objects keep a margin from their
    zones and everything spawns clear of the arm home poses.
    """
    cfg = cfg or RunConfig()
    if not 0 <= background_id < len(BACKGROUNDS):
        raise ValidationError(f"unknown background_id {background_id}")
    res = cfg.resolution
    rng = np.random.default_rng(np.random.PCG64(seed))
    placed: list[Object] = []
    for spec in task.objects:
        xmin, xmax, ymin, ymax = spec.spawn
        for attempt in range(1000):
            pos = (snap(rng.uniform(xmin, xmax), res), snap(rng.uniform(ymin, ymax), res))
            if _placement_ok(spec, pos, placed, task, res):
                placed.append(Object(spec.id, spec.shape, PALETTE[spec.color_name], pos, spec.radius))
                break
        else:
            raise SamplerError(
                f"task {task.task_id}: could not place {spec.id} after 1000 attempts"
            )
    handover_obj = task.success["object"] if task.success["kind"] == "handover" else None
    return WorldState(
        arm_left=(snap(HOME_LEFT[0], res), snap(HOME_LEFT[1], res)),
        arm_right=(snap(HOME_RIGHT[0], res), snap(HOME_RIGHT[1], res)),
        grip_left=False,
        grip_right=False,
        held_left=None,
        held_right=None,
        objects=tuple(placed),
        background_id=background_id,
        handover_object=handover_obj,
    )


def _placement_ok(spec: ObjectSpec, pos: tuple[float, float], placed: list[Object],
                  task: TaskSpec, res: int) -> bool:
    for other in placed:
        if within(pos, other.position, spec.radius + other.radius + _MIN_SEPARATION, res):
            return False
    for home in (HOME_LEFT, HOME_RIGHT):
        if within(pos, home, _HOME_CLEARANCE, res):
            return False
    # keep the reset state strictly outside the goal region
    success = task.success
    kind = success["kind"]
    by_id = {o.id: o for o in placed}
    if kind in ("in_zone", "handover"):
        pairs = success["pairs"] if kind == "in_zone" else [[success["object"], success["zone"]]]
        for obj_id, zone_id in pairs:
            if spec.id == obj_id and zone_id in by_id:
                zone = by_id[zone_id]
                if within(pos, zone.position, zone.radius + _GOAL_MARGIN, res):
                    return False
            if spec.id == zone_id and obj_id in by_id:
                other = by_id[obj_id]
                if within(pos, other.position, spec.radius + _GOAL_MARGIN, res):
                    return False
    elif kind == "strike":
        partner = {success["tool"]: success["target"], success["target"]: success["tool"]}
        mate = partner.get(spec.id)
        if mate and mate in by_id:
            if within(pos, by_id[mate].position, success["contact_dist"] + _GOAL_MARGIN, res):
                return False
    return True


def step(state: WorldState, action: ActionVector, cfg: RunConfig | None = None) -> WorldState:
    """Advance one tick. Total function: moves are clipped, grips latch objects.

    Order: arms move (clipped, clamped, grid-snapped), held objects track
    their arms, then grip effects fire left arm first. A closed, empty
    gripper within grasp range attaches the nearest free object (so a grip
    crossing to closed near an object grabs it, and an early close heals on
    arrival); opening releases at the current position.
    """
    cfg = cfg or RunConfig()
    res = cfg.resolution
    v = action.values

    def move(pos, dx, dy):
        nx = snap(min(1.0, max(0.0, pos[0] + float(np.clip(dx, -cfg.max_step, cfg.max_step)))), res)
        ny = snap(min(1.0, max(0.0, pos[1] + float(np.clip(dy, -cfg.max_step, cfg.max_step)))), res)
        return (nx, ny)

    arm_left = move(state.arm_left, v[0], v[1])
    arm_right = move(state.arm_right, v[3], v[4])
    grip_left = bool(v[2] > 0.0)
    grip_right = bool(v[5] > 0.0)

    positions = {o.id: o.position for o in state.objects}
    if state.held_left is not None:
        positions[state.held_left] = arm_left
    if state.held_right is not None:
        positions[state.held_right] = arm_right

    held_left, held_right = state.held_left, state.held_right

    def grip_effect(arm_pos, now_closed, held, other_held):
        if not now_closed:
            return None  # open hand: release in place (or stay empty)
        if held is not None:
            return held
        best, best_d2 = None, None
        limit = to_half(cfg.grasp_radius, res)
        for obj in state.objects:
            if obj.id == other_held:
                continue
            d2 = dist2_half(arm_pos, positions[obj.id], res)
            if d2 <= limit * limit and (best_d2 is None or d2 < best_d2):
                best, best_d2 = obj.id, d2
        return best

    held_left = grip_effect(arm_left, grip_left, held_left, held_right)
    if held_left is not None:
        positions[held_left] = arm_left
    held_right = grip_effect(arm_right, grip_right, held_right, held_left)
    if held_right is not None:
        positions[held_right] = arm_right

    latch_left = state.latch_left_held
    latch_right = state.latch_right_after_left
    if state.handover_object is not None:
        if held_left == state.handover_object:
            latch_left = True
        if latch_left and held_right == state.handover_object:
            latch_right = True

    objects = tuple(replace(o, position=positions[o.id]) for o in state.objects)
    return replace(
        state,
        arm_left=arm_left,
        arm_right=arm_right,
        grip_left=grip_left,
        grip_right=grip_right,
        held_left=held_left,
        held_right=held_right,
        objects=objects,
        latch_left_held=latch_left,
        latch_right_after_left=latch_right,
    )


_coord_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _coords(res: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinates in half-units: XX columns, YY rows."""
    if res not in _coord_cache:
        odd = np.arange(1, 2 * res, 2, dtype=np.int64)
        XX, YY = np.meshgrid(odd, odd)
        _coord_cache[res] = (XX, YY)
    return _coord_cache[res]


def _shape_mask(shape: str, cx: int, cy: int, r_half: int, res: int) -> np.ndarray:
    XX, YY = _coords(res)
    if shape == "disc":
        return (XX - cx) ** 2 + (YY - cy) ** 2 <= r_half * r_half
    return np.maximum(np.abs(XX - cx), np.abs(YY - cy)) <= r_half


def render(state: WorldState, background_id: int | None = None,
           cfg: RunConfig | None = None) -> Frame:
    """Rasterize a state to a frame with integer-only geometry.

    Draw order: background, free objects (fixtures were listed first by the
    task), arm markers, then held objects on top of their arm with a ring
    marking the grasp. Identical states render to identical bytes.
    """
    cfg = cfg or RunConfig()
    res = cfg.resolution
    bg = state.background_id if background_id is None else background_id
    if not 0 <= bg < len(BACKGROUNDS):
        raise ValidationError(f"unknown background_id {bg}")

    buf = np.empty((res, res, 3), dtype=np.uint8)
    buf[:] = PALETTE[BACKGROUNDS[bg]]

    held_ids = {state.held_left, state.held_right}
    for obj in state.objects:
        if obj.id in held_ids:
            continue
        _draw_object(buf, obj, res)

    for arm_pos, closed, side in (
        (state.arm_left, state.grip_left, "left"),
        (state.arm_right, state.grip_right, "right"),
    ):
        color = PALETTE[f"arm_{side}_{'closed' if closed else 'open'}"]
        mask = _shape_mask("block", to_half(arm_pos[0], res), to_half(arm_pos[1], res),
                           2 * ARM_HALF_PX, res)
        buf[mask] = color

    for held_id in (state.held_left, state.held_right):
        if held_id is None:
            continue
        obj = state.object_by_id(held_id)
        cx, cy = to_half(obj.position[0], res), to_half(obj.position[1], res)
        ring_r = to_half(obj.radius, res) + 2 * RING_GAP_PX
        XX, YY = _coords(res)
        cheb = np.maximum(np.abs(XX - cx), np.abs(YY - cy))
        buf[np.abs(cheb - ring_r) <= 1] = PALETTE["held_ring"]
        _draw_object(buf, obj, res)

    return Frame(buf)


def _draw_object(buf: np.ndarray, obj: Object, res: int) -> None:
    mask = _shape_mask(obj.shape, to_half(obj.position[0], res),
                       to_half(obj.position[1], res), to_half(obj.radius, res), res)
    buf[mask] = obj.color


def ground_truth_success(state: WorldState, task: TaskSpec,
                         cfg: RunConfig | None = None) -> int:
    """The true success function T: a pure predicate of the (latched) state."""
    cfg = cfg or RunConfig()
    res = cfg.resolution
    success = task.success
    kind = success["kind"]

    def unheld(object_id: str) -> bool:
        return state.holder_of(object_id) is None

    if kind == "in_zone":
        for obj_id, zone_id in success["pairs"]:
            obj = state.object_by_id(obj_id)
            zone = state.object_by_id(zone_id)
            if not unheld(obj_id) or not within(obj.position, zone.position, zone.radius, res):
                return 0
        return 1
    if kind == "handover":
        obj = state.object_by_id(success["object"])
        zone = state.object_by_id(success["zone"])
        ok = (
            state.latch_left_held
            and state.latch_right_after_left
            and unheld(success["object"])
            and within(obj.position, zone.position, zone.radius, res)
        )
        return int(ok)
    if kind == "strike":
        tool = state.object_by_id(success["tool"])
        target = state.object_by_id(success["target"])
        held = state.holder_of(success["tool"]) is not None
        return int(held and within(tool.position, target.position, success["contact_dist"], res))
    raise ValidationError(f"unknown success kind {kind!r}")


def proprio_vector(state: WorldState) -> np.ndarray:
    return np.array(
        [
            state.arm_left[0], state.arm_left[1], float(state.grip_left),
            state.arm_right[0], state.arm_right[1], float(state.grip_right),
            float(state.held_left is not None), float(state.held_right is not None),
        ],
        dtype=np.float64,
    )


def run_real_episode(policy, task: TaskSpec, seed: int, K: int | None = None,
                     H: int | None = None, background_id: int = 0,
                     cfg: RunConfig | None = None) -> Episode:
    """Closed-loop rollout in the true simulator.

    Every H steps the policy sees the current rendered frame plus the
    instruction and emits one action chunk; ground truth is evaluated on the
    final state.
    """
    cfg = cfg or RunConfig()
    K = K or cfg.episode_len
    H = H or cfg.chunk_len
    if (K - 1) % H != 0:
        raise ValidationError(f"K-1 ({K - 1}) must be divisible by H ({H})")

    state = reset(task, seed, background_id, cfg)
    frames = [render(state, cfg=cfg)]
    states = [proprio_vector(state)]
    begin = getattr(policy, "begin_episode", None)
    if begin is not None:
        begin(task, seed, background_id)

    chunks = []
    for _ in range((K - 1) // H):
        chunk, latent = policy.act(frames[-1], states[-1], task.instruction)
        if len(chunk) != H:
            raise ValidationError(
                f"policy {policy.policy_id} emitted a chunk of length {len(chunk)}, expected {H}"
            )
        chunks.append((chunk, replace(latent, chunk_index=len(chunks))))
        for act_vec in chunk.actions:
            state = step(state, act_vec, cfg)
            frames.append(render(state, cfg=cfg))
            states.append(proprio_vector(state))

    return Episode(
        task_id=task.task_id,
        policy_id=policy.policy_id,
        seed=seed,
        source=SOURCE_REAL,
        frames=tuple(frames),
        states=tuple(states),
        chunks=tuple(chunks),
        instruction=task.instruction,
        success_ground_truth=ground_truth_success(state, task, cfg),
    )
