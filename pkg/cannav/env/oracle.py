"""
Shortest-path expert over (position, heading) states.

Costs are lexicographic (total actions, moves). The PointNav expert drives
onto the goal cell before emitting Done; the ObjectNav expert stops as soon as
the success predicate holds.
"""
import heapq
from functools import lru_cache
from typing import Dict, List, Tuple

import numpy as np

from cannav.core.errors import OracleError
from cannav.env.gridworld import (
    HEADING_DELTAS,
    Action,
    AgentState,
    GridWorld,
    Heading,
    PointNavTask,
    Task,
    is_success,
)
from cannav.schemas.config_schemas import EnvConfig

Pose = Tuple[int, int, int]
Cost = Tuple[int, int]


def _is_terminal(world: GridWorld, pose: Pose, task: Task, config: EnvConfig) -> bool:
    x, y, h = pose
    if isinstance(task, PointNavTask):
        return (x, y) == task.goal
    return is_success(world, AgentState(position=(x, y), heading=Heading(h)), task, config)


def _advance(world: GridWorld, pose: Pose, action: Action) -> Pose:
    x, y, h = pose
    if action == Action.MOVE_AHEAD:
        dx, dy = HEADING_DELTAS[h]
        return (x + dx, y + dy, h) if world.is_open((x + dx, y + dy)) else pose
    if action == Action.ROTATE_LEFT:
        return (x, y, (h - 1) % 4)
    if action == Action.ROTATE_RIGHT:
        return (x, y, (h + 1) % 4)
    return pose


@lru_cache(maxsize=256)
def _cost_to_go(cells_bytes: bytes, shape: Tuple[int, int], num_categories: int, task: Task, window: int) -> Dict[Pose, Cost]:
    cells = np.frombuffer(cells_bytes, dtype=np.int64).reshape(shape).copy()
    world = GridWorld(cells=cells, num_categories=num_categories)
    config = EnvConfig(window=window, num_categories=num_categories)

    cost: Dict[Pose, Cost] = {}
    heap: List[Tuple[Cost, Pose]] = []
    for x, y in world.open_cells():
        for h in range(4):
            pose = (x, y, h)
            if _is_terminal(world, pose, task, config):
                cost[pose] = (0, 0)
                heapq.heappush(heap, ((0, 0), pose))

    while heap:
        c, pose = heapq.heappop(heap)
        if cost.get(pose, c) < c:
            continue
        x, y, h = pose
        predecessors = [
            ((x, y, (h - 1) % 4), (c[0] + 1, c[1])),  # rotated right into pose
            ((x, y, (h + 1) % 4), (c[0] + 1, c[1])),  # rotated left into pose
        ]
        dx, dy = HEADING_DELTAS[h]
        if world.is_open((x - dx, y - dy)):
            predecessors.append(((x - dx, y - dy, h), (c[0] + 1, c[1] + 1)))
        for prev, pc in predecessors:
            if pc < cost.get(prev, (np.iinfo(np.int64).max, 0)):
                cost[prev] = pc
                heapq.heappush(heap, (pc, prev))
    return cost


def cost_to_go(world: GridWorld, task: Task, config: EnvConfig) -> Dict[Pose, Cost]:
    cells = np.ascontiguousarray(world.cells, dtype=np.int64)
    return _cost_to_go(cells.tobytes(), cells.shape, world.num_categories, task, config.window)


def oracle_action(world: GridWorld, state: AgentState, task: Task, config: EnvConfig) -> Action:
    """Next expert action; Done exactly at a terminal pose."""
    costs = cost_to_go(world, task, config)
    pose = (state.position[0], state.position[1], int(state.heading))
    if pose not in costs:
        raise OracleError(f"Goal unreachable from {state.position} heading {state.heading.name}")
    if costs[pose] == (0, 0):
        return Action.DONE

    best, best_cost = None, None
    for action in (Action.MOVE_AHEAD, Action.ROTATE_LEFT, Action.ROTATE_RIGHT):
        nxt = _advance(world, pose, action)
        if nxt == pose or nxt not in costs:
            continue
        c = costs[nxt]
        total = (c[0] + 1, c[1] + int(action == Action.MOVE_AHEAD))
        if best_cost is None or total < best_cost:
            best, best_cost = action, total
    return best


def oracle_plan(world: GridWorld, state: AgentState, task: Task, config: EnvConfig) -> List[Action]:
    """Full expert action sequence from `state`, ending with Done."""
    pose_state = state
    plan: List[Action] = []
    limit = 4 * world.width * world.height + 1
    while len(plan) <= limit:
        action = oracle_action(world, pose_state, task, config)
        plan.append(action)
        if action == Action.DONE:
            return plan
        x, y, h = _advance(world, (pose_state.position[0], pose_state.position[1], int(pose_state.heading)), action)
        pose_state = AgentState(position=(x, y), heading=Heading(h))
    raise OracleError("Expert plan did not terminate")


def shortest_path_moves(world: GridWorld, state: AgentState, task: Task, config: EnvConfig) -> int:
    """Move count of the expert plan; the SPL reference length."""
    return sum(1 for a in oracle_plan(world, state, task, config) if a == Action.MOVE_AHEAD)
