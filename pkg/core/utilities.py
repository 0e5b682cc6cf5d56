import math
import time
import random
import string
from typing import Any, Optional, Callable, Union


def encode_real(value: float) -> Union[float, str]:
    """
    Encode an extended real for canonical JSON: infinities become the strings "inf"/"-inf".

    Args:
        value:
            Finite or infinite float.

    Returns:
        The float itself, or "inf"/"-inf".
    """
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return float(value)


def decode_real(raw: Any) -> float:
    """
    Inverse of encode_real. Accepts numbers and the strings "inf"/"-inf".

    Raises:
        ValueError if the value is neither a number nor one of the two strings.
    """
    if isinstance(raw, bool):
        raise ValueError(f"expected a number, got {raw!r}")
    if isinstance(raw, (int, float)):
        value = float(raw)
        if math.isnan(value):
            raise ValueError("NaN is not a valid real")
        return value
    if raw == "inf":
        return math.inf
    if raw == "-inf":
        return -math.inf

    raise ValueError(f"expected a number or \"inf\"/\"-inf\", got {raw!r}")


def format_real(value: float, digits: int = 12) -> str:
    """
    Human-readable float for tables ("inf" stays "inf").
    """
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{digits}g}"


def random_suffix(length: int = 4) -> str:
    """
    Short filename-safe suffix (not cryptographically safe) for output files that would overwrite another.
    """
    return "".join(random.choices(string.ascii_lowercase + string.digits, k=length))


class TimedContext:
    """
    Context manager that reports the wall time spent inside it.

    Args:
        end_text:
            Message template, {time} is replaced with the elapsed seconds.
        callback:
            Receives the formatted message on exit (e.g. log.info).
        decimal_places:
            Rounding of the elapsed seconds.
        report_on_exception:
            Also report when the block raised.
    """
    __slots__ = ("_end_text", "_callback", "_decimal_places", "_report_on_exception", "_start", "elapsed")

    def __init__(self, end_text: str, callback: Callable[[str], Any] = print,
                 decimal_places: int = 1, report_on_exception: bool = False):
        self._end_text = end_text
        self._callback = callback
        self._decimal_places = decimal_places
        self._report_on_exception = report_on_exception
        self._start: Optional[float] = None
        self.elapsed: Optional[float] = None

    def __enter__(self) -> "TimedContext":
        self._start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.elapsed = time.perf_counter() - self._start
        if exc_type is None or self._report_on_exception:
            self._callback(self._end_text.format(time=round(self.elapsed, self._decimal_places)))

        # exceptions propagate
        return False
