"""
Partially observable grid navigation.

Worlds, agent states and tasks are immutable values; `step` is a pure
function of (world, state, task, action, config).
"""
import logging
import math
from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

import numpy as np

from cannav.core.errors import EnvironmentStepError, GenerationError
from cannav.core.seeding import seed_sequence
from cannav.schemas.config_schemas import EnvConfig

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]

EMPTY = 0
WALL = 1
OBJECT_BASE = 2  # object of category k is stored as OBJECT_BASE + k


class Heading(IntEnum):
    N = 0
    E = 1
    S = 2
    W = 3


# (dx, dy) with y growing downwards
HEADING_DELTAS: Dict[int, Cell] = {
    Heading.N: (0, -1),
    Heading.E: (1, 0),
    Heading.S: (0, 1),
    Heading.W: (-1, 0),
}


class Action(IntEnum):
    MOVE_AHEAD = 0
    ROTATE_LEFT = 1
    ROTATE_RIGHT = 2
    DONE = 3  # "Stop" in ObjectNav


NUM_ACTIONS = len(Action)
NULL_ACTION = NUM_ACTIONS  # start-of-episode token used by the agent


@dataclass(frozen=True)
class GridWorld:
    cells: np.ndarray  # (height, width) of EMPTY / WALL / OBJECT_BASE + k
    num_categories: int

    def __post_init__(self):
        self.cells.setflags(write=False)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def inside(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def code(self, cell: Cell) -> int:
        return int(self.cells[cell[1], cell[0]]) if self.inside(cell) else WALL

    def is_open(self, cell: Cell) -> bool:
        return self.code(cell) != WALL

    def open_cells(self) -> List[Cell]:
        ys, xs = np.nonzero(self.cells != WALL)
        return [(int(x), int(y)) for y, x in zip(ys, xs)]

    def category_cells(self, category: int) -> List[Cell]:
        ys, xs = np.nonzero(self.cells == OBJECT_BASE + category)
        return [(int(x), int(y)) for y, x in zip(ys, xs)]

    def categories_present(self) -> List[int]:
        return [k for k in range(self.num_categories) if np.any(self.cells == OBJECT_BASE + k)]


@dataclass(frozen=True)
class AgentState:
    position: Cell
    heading: Heading
    steps: int = 0
    done: bool = False


@dataclass(frozen=True)
class PointNavTask:
    goal: Cell


@dataclass(frozen=True)
class ObjectNavTask:
    category: int


Task = Union[PointNavTask, ObjectNavTask]


@dataclass(frozen=True)
class Observation:
    window: np.ndarray  # (w, w) cell codes, agent facing up, centred on the cell ahead
    goal: np.ndarray  # PointNav: (geodesic distance, bearing); ObjectNav: empty
    category: Optional[int] = None  # ObjectNav target category
    num_categories: int = 6

    def one_hot(self) -> np.ndarray:
        return np.eye(OBJECT_BASE + self.num_categories)[self.window]


@dataclass(frozen=True)
class StepInfo:
    success: bool
    geodesic_to_goal: Optional[int]
    collided: bool


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    done: bool
    info: StepInfo


# ---- geodesics -------------------------------------------------------------

@lru_cache(maxsize=4096)
def _distance_field(cells_bytes: bytes, shape: Tuple[int, int], sources: FrozenSet[Cell]) -> np.ndarray:
    cells = np.frombuffer(cells_bytes, dtype=np.int64).reshape(shape)
    height, width = shape
    dist = np.full(shape, -1, dtype=np.int64)
    queue = deque()
    for x, y in sorted(sources):
        if cells[y, x] != WALL and dist[y, x] < 0:
            dist[y, x] = 0
            queue.append((x, y))
    while queue:
        x, y = queue.popleft()
        for dx, dy in HEADING_DELTAS.values():
            nx, ny = x + dx, y + dy
            if 0 <= nx < width and 0 <= ny < height and cells[ny, nx] != WALL and dist[ny, nx] < 0:
                dist[ny, nx] = dist[y, x] + 1
                queue.append((nx, ny))
    dist.setflags(write=False)
    return dist


def distance_field(world: GridWorld, sources) -> np.ndarray:
    """BFS distances (4-connected, through non-wall cells) to the nearest source; -1 if unreachable."""
    cells = np.ascontiguousarray(world.cells, dtype=np.int64)
    return _distance_field(cells.tobytes(), cells.shape, frozenset(sources))


def geodesic(world: GridWorld, start: Cell, end: Cell) -> Optional[int]:
    """Shortest-path length in cells, or None when unreachable."""
    if not world.inside(start) or not world.inside(end):
        raise ValueError(f"Cells {start} and {end} must lie inside the world")
    d = int(distance_field(world, [end])[start[1], start[0]])
    return None if d < 0 else d


def goal_cells(world: GridWorld, task: Task) -> List[Cell]:
    if isinstance(task, PointNavTask):
        return [task.goal]
    return world.category_cells(task.category)


def goal_distance(world: GridWorld, task: Task, position: Cell) -> Optional[int]:
    d = int(distance_field(world, goal_cells(world, task))[position[1], position[0]])
    return None if d < 0 else d


# ---- generation ------------------------------------------------------------

def _keep_largest_component(cells: np.ndarray) -> np.ndarray:
    height, width = cells.shape
    label = np.full(cells.shape, -1, dtype=np.int64)
    sizes = []
    for y in range(height):
        for x in range(width):
            if cells[y, x] == WALL or label[y, x] >= 0:
                continue
            component = len(sizes)
            label[y, x] = component
            queue, size = deque([(x, y)]), 0
            while queue:
                cx, cy = queue.popleft()
                size += 1
                for dx, dy in HEADING_DELTAS.values():
                    nx, ny = cx + dx, cy + dy
                    if 0 <= nx < width and 0 <= ny < height and cells[ny, nx] != WALL and label[ny, nx] < 0:
                        label[ny, nx] = component
                        queue.append((nx, ny))
            sizes.append(size)
    if not sizes:
        return cells
    keep = int(np.argmax(sizes))
    out = cells.copy()
    out[(label != keep) & (cells != WALL)] = WALL
    return out


def parse_layout(rows: List[str], num_categories: int) -> np.ndarray:
    cells = np.full((len(rows), len(rows[0])), EMPTY, dtype=np.int64)
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch == "#":
                cells[y, x] = WALL
            elif ch == ".":
                cells[y, x] = EMPTY
            elif "A" <= ch <= "Z" and ord(ch) - ord("A") < num_categories:
                cells[y, x] = OBJECT_BASE + ord(ch) - ord("A")
            else:
                raise ValueError(f"Unknown layout symbol {ch!r} at row {y}, column {x}")
    return cells


def _build_cells(seed: int, config: EnvConfig) -> np.ndarray:
    if config.layout is not None:
        cells = parse_layout(config.layout, config.num_categories)
        cells[0, :] = WALL
        cells[-1, :] = WALL
        cells[:, 0] = WALL
        cells[:, -1] = WALL
        return _keep_largest_component(cells)

    rng = np.random.default_rng(seed_sequence(seed, 0))
    cells = np.full((config.height, config.width), EMPTY, dtype=np.int64)
    cells[0, :] = WALL
    cells[-1, :] = WALL
    cells[:, 0] = WALL
    cells[:, -1] = WALL
    interior = rng.random((config.height - 2, config.width - 2)) < config.obstacle_density
    cells[1:-1, 1:-1][interior] = WALL
    cells = _keep_largest_component(cells)

    free = [(x, y) for y, x in zip(*np.nonzero(cells == EMPTY))]
    for category in range(config.num_categories):
        for _ in range(config.objects_per_category):
            if not free:
                break
            x, y = free.pop(int(rng.integers(len(free))))
            cells[y, x] = OBJECT_BASE + category
    return cells


def generate(seed: int, config: EnvConfig, episode_index: int = 0) -> Tuple[GridWorld, AgentState, Task]:
    """
    Deterministic world, spawn and task for `seed`.
    The layout depends only on `seed`; spawn and task also on `episode_index`.
    """
    cells = _build_cells(seed, config)
    world = GridWorld(cells=cells, num_categories=config.num_categories)
    open_cells = world.open_cells()
    if len(open_cells) < 2:
        raise GenerationError("World has fewer than two open cells", seed)

    rng = np.random.default_rng(seed_sequence(seed, 1, episode_index))
    for _ in range(config.generation_retries):
        spawn = open_cells[int(rng.integers(len(open_cells)))]
        heading = Heading(int(rng.integers(4)))
        if config.task_variant == "pointnav":
            goal = open_cells[int(rng.integers(len(open_cells)))]
            task: Task = PointNavTask(goal=goal)
        else:
            present = world.categories_present()
            if not present:
                raise GenerationError("ObjectNav world has no objects", seed)
            task = ObjectNavTask(category=int(present[int(rng.integers(len(present)))]))
        distance = goal_distance(world, task, spawn)
        if distance is not None and distance >= config.min_spawn_distance:
            return world, AgentState(position=spawn, heading=heading), task

    raise GenerationError(
        f"No spawn/goal pair with geodesic >= {config.min_spawn_distance} after {config.generation_retries} retries",
        seed,
    )


# ---- observation -----------------------------------------------------------

def bearing(state: AgentState, target: Cell) -> float:
    """Angle from the heading to the target in (-pi, pi], positive clockwise."""
    fx, fy = HEADING_DELTAS[state.heading]
    rx, ry = HEADING_DELTAS[(state.heading + 1) % 4]
    gx, gy = target[0] - state.position[0], target[1] - state.position[1]
    if gx == 0 and gy == 0:
        return 0.0
    angle = math.atan2(gx * rx + gy * ry, gx * fx + gy * fy)
    return math.pi if angle <= -math.pi else angle


def window_cells(state: AgentState, size: int) -> List[List[Cell]]:
    """World cells of the egocentric window; row 0 is farthest ahead, column 0 leftmost."""
    fx, fy = HEADING_DELTAS[state.heading]
    rx, ry = HEADING_DELTAS[(state.heading + 1) % 4]
    ax, ay = state.position[0] + fx, state.position[1] + fy
    half = size // 2
    rows = []
    for r in range(size):
        forward = half - r
        row = []
        for c in range(size):
            right = c - half
            row.append((ax + forward * fx + right * rx, ay + forward * fy + right * ry))
        rows.append(row)
    return rows


def observe(world: GridWorld, state: AgentState, task: Task, config: EnvConfig) -> Observation:
    window = np.array(
        [[world.code(cell) for cell in row] for row in window_cells(state, config.window)],
        dtype=np.int64,
    )
    if isinstance(task, PointNavTask):
        distance = goal_distance(world, task, state.position)
        goal = np.array([float(distance), bearing(state, task.goal)])
        return Observation(window=window, goal=goal, num_categories=world.num_categories)
    return Observation(window=window, goal=np.zeros(0), category=task.category, num_categories=world.num_categories)


# ---- dynamics --------------------------------------------------------------

def reward(
    prev_geodesic: float,
    new_geodesic: float,
    success_event: bool,
    collided: bool,
    shaping: float = 1.0,
    step_penalty: float = 0.01,
    success_reward: float = 10.0,
) -> float:
    """success bonus + shaping * progress - step penalty; collisions carry no extra term."""
    r = success_reward * float(success_event) + shaping * (prev_geodesic - new_geodesic) - step_penalty
    return float(r)


def is_success(world: GridWorld, state: AgentState, task: Task, config: EnvConfig) -> bool:
    if isinstance(task, PointNavTask):
        distance = goal_distance(world, task, state.position)
        return distance is not None and distance <= 1
    from_agent = distance_field(world, [state.position])
    for row in window_cells(state, config.window):
        for cell in row:
            if world.code(cell) == OBJECT_BASE + task.category:
                d = int(from_agent[cell[1], cell[0]])
                if 0 <= d <= 2:
                    return True
    return False


def step(
    world: GridWorld,
    state: AgentState,
    task: Task,
    action: int,
    config: EnvConfig,
) -> Tuple[AgentState, StepResult]:
    if state.done:
        raise EnvironmentStepError("step() called on a finished episode")
    if not 0 <= int(action) < NUM_ACTIONS:
        raise EnvironmentStepError(f"Action id {action} out of range [0, {NUM_ACTIONS})")
    action = Action(int(action))

    prev = goal_distance(world, task, state.position)
    position, heading = state.position, state.heading
    collided = False
    success = False
    finished = False

    if action == Action.MOVE_AHEAD:
        dx, dy = HEADING_DELTAS[heading]
        target = (position[0] + dx, position[1] + dy)
        if world.is_open(target):
            position = target
        else:
            collided = True
    elif action == Action.ROTATE_LEFT:
        heading = Heading((heading - 1) % 4)
    elif action == Action.ROTATE_RIGHT:
        heading = Heading((heading + 1) % 4)
    else:
        success = is_success(world, state, task, config)
        finished = True

    steps = state.steps + 1
    done = finished or steps >= config.max_steps
    new_state = AgentState(position=position, heading=heading, steps=steps, done=done)
    new = goal_distance(world, task, position)
    r = reward(
        prev, new, success, collided,
        shaping=config.shaping, step_penalty=config.step_penalty, success_reward=config.success_reward,
    )
    result = StepResult(
        observation=observe(world, new_state, task, config),
        reward=r,
        done=done,
        info=StepInfo(success=success, geodesic_to_goal=new, collided=collided),
    )
    return new_state, result
