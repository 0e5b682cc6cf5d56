from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional


class TriBool(Enum):
    """
    Three-valued answer. UNKNOWN means the certified bounds did not separate the cases.
    """
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"

    @classmethod
    def of(cls, value: bool) -> "TriBool":
        return cls.YES if value else cls.NO

    def __invert__(self) -> "TriBool":
        if self is TriBool.UNKNOWN:
            return self
        return TriBool.NO if self is TriBool.YES else TriBool.YES

    @staticmethod
    def all(values: Iterable["TriBool"]) -> "TriBool":
        """
        Kleene conjunction: NO wins over UNKNOWN, UNKNOWN wins over YES.
        """
        result = TriBool.YES
        for value in values:
            if value is TriBool.NO:
                return TriBool.NO
            if value is TriBool.UNKNOWN:
                result = TriBool.UNKNOWN
        return result


class Answer(Enum):
    YES = "yes"
    NO = "no"
    UNSUPPORTED = "unsupported"


@dataclass(frozen=True)
class Verdict:
    """
    Decision of a membership or subspace question, with the first failed clause as the reason.
    """
    answer: Answer
    reason: Optional[str] = None

    @classmethod
    def yes(cls) -> "Verdict":
        return cls(Answer.YES)

    @classmethod
    def no(cls, reason: str) -> "Verdict":
        return cls(Answer.NO, reason)

    @classmethod
    def unsupported(cls, reason: str) -> "Verdict":
        return cls(Answer.UNSUPPORTED, reason)

    @property
    def is_yes(self) -> bool:
        return self.answer is Answer.YES

    def dump(self) -> dict:
        return {"answer": self.answer.value, "reason": self.reason}

    def __str__(self):
        if self.reason is None:
            return self.answer.value
        return f"{self.answer.value} ({self.reason})"
