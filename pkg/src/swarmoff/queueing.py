"""Edge-server queue state machine.

One task may be in service; up to capacity_M more wait in line and are served
strictly in order. A waiting entry whose upload has not finished when the
server reaches it makes the server idle until the upload completes. Instances
are immutable; transitions return new queues, so decision code can evaluate
hypothetical insertions against live state safely.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

from .model import RobotState, Task


class QueueFullError(RuntimeError):
    pass


class QueuePositionError(IndexError):
    pass


@dataclass(frozen=True)
class QueueEntry:
    task: Task
    arrival_complete_at: float  # absolute time the upload finishes
    t_com: float  # server compute duration, seconds
    enqueued_at: float  # absolute admission time (= upload start)
    reported: Optional[RobotState] = None  # robot state sent with the request

    def validate(self) -> None:
        if self.t_com <= 0:
            raise ValueError("t_com must be positive")
        if self.arrival_complete_at < self.task.t_gen:
            raise ValueError("upload cannot finish before the task is generated")


@dataclass(frozen=True)
class InService:
    entry: QueueEntry
    started_at: float  # may lie in the future while the server idles for the upload

    @property
    def finishes_at(self) -> float:
        return self.started_at + self.entry.t_com


@dataclass(frozen=True)
class ServerQueue:
    capacity_M: int
    in_service: Optional[InService] = None
    waiting: Tuple[QueueEntry, ...] = ()

    @property
    def length(self) -> int:
        return len(self.waiting)

    @property
    def is_full(self) -> bool:
        return len(self.waiting) >= self.capacity_M

    def _free_abs(self, now: float) -> float:
        """Absolute time the server finishes its current task (now if idle)."""
        if self.in_service is None:
            return now
        return max(now, self.in_service.finishes_at)

    def completion_schedule(self, now: float) -> List[Tuple[float, float]]:
        """(start, finish) absolute times for every waiting entry, in order."""
        free = self._free_abs(now)
        out = []
        for e in self.waiting:
            start = max(free, e.arrival_complete_at)
            free = start + e.t_com
            out.append((start, free))
        return out

    def ready_time(self, position: int, now: float) -> float:
        """Seconds from now until the server would begin a task at `position`.

        Position 1 is served right after the in-service remainder; position
        L+1 is the tail. Accounts for idling on not-yet-uploaded entries.
        """
        if not 1 <= position <= len(self.waiting) + 1:
            raise QueuePositionError(
                f"position {position} out of range 1..{len(self.waiting) + 1}"
            )
        free = self._free_abs(now)
        for e in self.waiting[: position - 1]:
            start = max(free, e.arrival_complete_at)
            free = start + e.t_com
        return free - now

    def insert(self, entry: QueueEntry, position: int) -> "ServerQueue":
        """New queue with `entry` at `position`; later entries shift back."""
        if self.is_full:
            raise QueueFullError(
                f"waiting line already holds capacity_M={self.capacity_M} tasks"
            )
        if not 1 <= position <= len(self.waiting) + 1:
            raise QueuePositionError(
                f"position {position} out of range 1..{len(self.waiting) + 1}"
            )
        w = list(self.waiting)
        w.insert(position - 1, entry)
        return replace(self, waiting=tuple(w))

    def promote(self, now: float) -> "ServerQueue":
        """Move the waiting head into service if the server is idle.

        The promoted entry starts at max(now, upload completion): the server
        commits to it and idles if its bits are still in flight.
        """
        if self.in_service is not None or not self.waiting:
            return self
        head = self.waiting[0]
        svc = InService(entry=head, started_at=max(now, head.arrival_complete_at))
        return replace(self, in_service=svc, waiting=self.waiting[1:])

    def complete_head(self, now: float) -> Tuple["ServerQueue", InService]:
        """Finish the in-service task and promote the next waiting entry."""
        if self.in_service is None:
            raise RuntimeError("complete_head called with no task in service")
        if self.in_service.finishes_at > now + 1e-9:
            raise RuntimeError(
                f"in-service task finishes at {self.in_service.finishes_at}, not yet at {now}"
            )
        finished = self.in_service
        return replace(self, in_service=None).promote(now), finished

    def delta_delays(
        self, entry: QueueEntry, position: int, now: float
    ) -> List[Tuple[int, float]]:
        """Completion-time increase of each existing waiting entry if `entry`
        were inserted at `position`. Entries ahead of the cut are unaffected.
        """
        before = self.completion_schedule(now)
        after = self.insert(entry, position).completion_schedule(now)
        del after[position - 1]  # drop the hypothetical entry's own slot
        return [
            (e.task.id, new[1] - old[1])
            for e, old, new in zip(self.waiting, before, after)
        ]
