"""Policy configuration shared by the model builder, the weights and the simulator."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Mapping

PREFERENCE_VARIANTS = ("A", "B", "C")
WAITING_SCOPES = ("all_subjects", "first_subject_only")


@dataclass(frozen=True)
class PolicyConfig:
    """Objective weights and structural knobs of one matching run.

    Attributes:
        group_weight: value of one group hour relative to a pair hour (w^g).
        volume_weight: per-hour volume weight, identical for every activity.
        preference_variant: "A" linear ranks, "B" squared student rank,
            "C" both ranks squared.
        mentor_pair_weight: penalty per distinct (student, mentor) pair.
        wait_weight: weight per day waited (WT); 0 disables waiting priority.
        waiting_scope: "all_subjects" or "first_subject_only".
        slots: potential groups per (mentor, subject).
        group_capacity: default maximum group size.
        big_m: bound on the number of subjects of one student.
    """

    group_weight: float = 0.7
    volume_weight: float = 50.0
    preference_variant: str = "A"
    mentor_pair_weight: float = 5.0
    wait_weight: float = 0.0
    waiting_scope: str = "all_subjects"
    slots: int = 5
    group_capacity: int = 5
    big_m: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.group_weight <= 1.0:
            raise ValueError(f"group_weight must lie in (0, 1], got {self.group_weight}")
        if self.preference_variant not in PREFERENCE_VARIANTS:
            raise ValueError(f"unknown preference variant {self.preference_variant!r}")
        if self.wait_weight < 0:
            raise ValueError("wait_weight must be nonnegative")
        if self.waiting_scope not in WAITING_SCOPES:
            raise ValueError(f"unknown waiting scope {self.waiting_scope!r}")
        if self.slots < 0:
            raise ValueError("slots must be nonnegative")
        if self.group_capacity < 2:
            raise ValueError("group_capacity must be at least 2")
        if self.big_m < 1:
            raise ValueError("big_m must be positive")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None) -> "PolicyConfig":
        """Build a config from a (possibly partial) mapping; absent keys take defaults."""
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown policy keys: {sorted(unknown)}")
        return cls(**data)

    def with_(self, **changes: Any) -> "PolicyConfig":
        return replace(self, **changes)
