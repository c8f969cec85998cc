from abc import abstractmethod
from typing import Callable, Generic, Iterator, List, Optional, TypeVar, final

from linkscrub.core.patterns.context_managers import StartCloseContextMixin

EventT = TypeVar("EventT")


class EventConsumer(StartCloseContextMixin, Generic[EventT]):
    def __init__(self, callbacks: Optional[List[Callable[[EventT], None]]] = None):
        self._callbacks: List[Callable[[EventT], None]] = callbacks or []

    @final
    def register(self, callback: Callable[[EventT], None]):
        self._callbacks.append(callback)

    def notify(self, event: EventT) -> None:
        for callback in self._callbacks:
            callback(event)

    @abstractmethod
    def consume(self) -> Iterator[EventT]:
        raise NotImplementedError("consume() is not implemented")


class EventProducer(StartCloseContextMixin, Generic[EventT]):
    @abstractmethod
    def produce(self, event: EventT) -> None:
        raise NotImplementedError("produce() is not implemented")


__all__ = [
    "EventConsumer",
    "EventProducer",
]
