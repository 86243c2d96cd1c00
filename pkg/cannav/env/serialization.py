from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from cannav.env.gridworld import (
    EMPTY,
    OBJECT_BASE,
    WALL,
    AgentState,
    GridWorld,
    Heading,
    ObjectNavTask,
    Observation,
    PointNavTask,
    Task,
    parse_layout,
)


def world_rows(world: GridWorld) -> List[str]:
    rows = []
    for y in range(world.height):
        chars = []
        for x in range(world.width):
            code = int(world.cells[y, x])
            if code == WALL:
                chars.append("#")
            elif code == EMPTY:
                chars.append(".")
            else:
                chars.append(chr(ord("A") + code - OBJECT_BASE))
        rows.append("".join(chars))
    return rows


def world_to_dict(world: GridWorld, state: Optional[AgentState] = None, task: Optional[Task] = None) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "width": world.width,
        "height": world.height,
        "num_categories": world.num_categories,
        "rows": world_rows(world),
    }
    if state is not None:
        doc["agent"] = {"position": list(state.position), "heading": state.heading.name, "steps": state.steps}
    if task is not None:
        doc["task"] = (
            {"variant": "pointnav", "goal": list(task.goal)}
            if isinstance(task, PointNavTask)
            else {"variant": "objectnav", "category": task.category}
        )
    return doc


def world_from_dict(doc: Dict[str, Any]) -> Tuple[GridWorld, Optional[AgentState], Optional[Task]]:
    world = GridWorld(cells=parse_layout(doc["rows"], doc["num_categories"]), num_categories=doc["num_categories"])
    state = None
    if "agent" in doc:
        agent = doc["agent"]
        state = AgentState(
            position=tuple(agent["position"]),
            heading=Heading[agent["heading"]],
            steps=agent.get("steps", 0),
        )
    task = None
    if "task" in doc:
        task_doc = doc["task"]
        task = PointNavTask(goal=tuple(task_doc["goal"])) if task_doc["variant"] == "pointnav" else ObjectNavTask(task_doc["category"])
    return world, state, task


def observation_to_dict(observation: Observation) -> Dict[str, Any]:
    return {
        "window": observation.window.tolist(),
        "goal": observation.goal.tolist(),
        "category": observation.category,
    }


def observation_from_dict(doc: Dict[str, Any], num_categories: int) -> Observation:
    return Observation(
        window=np.asarray(doc["window"], dtype=np.int64),
        goal=np.asarray(doc["goal"], dtype=np.float64),
        category=doc.get("category"),
        num_categories=num_categories,
    )
