"""In-process publish/subscribe broker with per-topic FIFO ordering.

Messages published while a delivery is in progress are queued behind it, so
each subscriber sees every message exactly once, in publish order per topic,
even when handlers publish follow-ups of their own.
"""

from __future__ import annotations

from collections import deque
from typing import Any, Callable


class TopicBus:
    def __init__(self) -> None:
        self._subscribers: dict[str, list[Callable]] = {}
        self._queue: deque = deque()
        self._delivering = False
        self.delivered = 0

    def subscribe(self, topic: str, handler: Callable[[Any], None]) -> None:
        self._subscribers.setdefault(topic, []).append(handler)

    def publish(self, topic: str, message: Any) -> None:
        self._queue.append((topic, message))
        if self._delivering:
            return
        self._delivering = True
        try:
            while self._queue:
                current_topic, current = self._queue.popleft()
                for handler in tuple(self._subscribers.get(current_topic, ())):
                    handler(current)
                    self.delivered += 1
        finally:
            self._delivering = False
