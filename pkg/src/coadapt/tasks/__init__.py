"""Concrete task environments and their registry."""

from __future__ import annotations

from .base import Box, Task
from .blocks import BlocksTask
from .character import CharacterTask
from .hmenu import HierarchicalMenuTask
from .keypad import KeypadTask
from .reach import ReachTask

_TASK_CLASSES = {
    cls.task_id: cls
    for cls in (CharacterTask, KeypadTask, BlocksTask, ReachTask, HierarchicalMenuTask)
}

TASK_IDS = tuple(sorted(_TASK_CLASSES))


def get_task(task_id: str) -> Task:
    try:
        return _TASK_CLASSES[task_id]()
    except KeyError:
        raise KeyError(f"unknown task {task_id!r}; known: {', '.join(TASK_IDS)}") from None


__all__ = ["Box", "Task", "TASK_IDS", "get_task", "CharacterTask", "KeypadTask", "BlocksTask", "ReachTask", "HierarchicalMenuTask"]
