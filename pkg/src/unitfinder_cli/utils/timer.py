import time
from contextlib import ContextDecorator
from dataclasses import dataclass, field
from typing import Any, Callable, ClassVar, Optional


class TimerError(Exception):
    """A custom exception used to report errors in use of Timer class"""


@dataclass
class Timer(ContextDecorator):
    """
    Wall-clock timer usable as an object, a context manager or a decorator.

    Besides reporting through ``logger``, the timer keeps the duration of the last interval in
    ``last`` and the running total of all intervals in ``total``, so that searches can store their
    wall-clock cost in result records. Named timers also accumulate in the class-level ``timers``
    registry.
    """

    timers: ClassVar[dict[str, float]] = {}
    name: Optional[str] = None
    text: str = "Elapsed time: {:0.4f} seconds"
    logger: Optional[Callable[[str], None]] = None
    last: float = field(default=0.0, init=False)
    total: float = field(default=0.0, init=False)
    _start_time: Optional[float] = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.name:
            self.timers.setdefault(self.name, 0.0)

    @property
    def running(self) -> bool:
        """Whether an interval is open"""
        return self._start_time is not None

    def elapsed(self) -> float:
        """Seconds since the open interval started, without stopping it"""
        if self._start_time is None:
            raise TimerError("Timer is not running. Use .start() to start it")
        return time.perf_counter() - self._start_time

    def start(self) -> None:
        """Start a new interval"""
        if self._start_time is not None:
            raise TimerError("Timer is running. Use .stop() to stop it")
        self._start_time = time.perf_counter()

    def stop(self) -> float:
        """Close the interval, report it and return its duration in seconds"""
        elapsed_time = self.elapsed()
        self._start_time = None
        self.last = elapsed_time
        self.total += elapsed_time

        if self.logger:
            self.logger(self.text.format(elapsed_time))
        if self.name:
            self.timers[self.name] += elapsed_time

        return elapsed_time

    def __enter__(self) -> "Timer":
        self.start()
        return self

    def __exit__(self, *exc_info: Any) -> None:
        self.stop()
