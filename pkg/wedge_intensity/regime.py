"""
Regime - Which of the default-intensity formulas applies to a firm.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional


class RegimeTag(Enum):
    """Default history of the other firm, as seen at the evaluation time."""
    BOTH_ALIVE = "BothAlive"
    CO_DEFAULT_IN_WINDOW = "CoDefaultInWindow"
    CO_DEFAULT_BEFORE_WINDOW = "CoDefaultBeforeWindow"
    TARGET_DEFAULTED = "TargetDefaulted"


@dataclass(frozen=True)
class Regime:
    """
    Regime tag plus, for CoDefaultInWindow, the other firm's default time.

    Attributes:
        tag: Regime tag.
        s: Absolute default time of the other firm (CoDefaultInWindow only).
    """
    tag: RegimeTag
    s: Optional[float] = None

    def __str__(self) -> str:
        return self.tag.value

    @property
    def alive(self) -> bool:
        return self.tag is not RegimeTag.TARGET_DEFAULTED

    def to_dict(self) -> Dict[str, Any]:
        return {"tag": self.tag.value, "s": self.s}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Regime":
        return cls(tag=RegimeTag(data["tag"]), s=data.get("s"))
