"""Retention candidate sets: which of the two token streams a rule keeps."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CandidateSet:
    """A subset of {2D, 3D}: the modalities proposed for retention at a patch."""

    has2d: bool
    has3d: bool

    def intersect(self, other: "CandidateSet") -> "CandidateSet":
        return CandidateSet(self.has2d and other.has2d, self.has3d and other.has3d)

    @property
    def empty(self) -> bool:
        return not (self.has2d or self.has3d)

    def __str__(self) -> str:
        if self.empty:
            return "{}"
        parts = (["2D"] if self.has2d else []) + (["3D"] if self.has3d else [])
        return "{" + ",".join(parts) + "}"


NONE = CandidateSet(False, False)
ONLY_2D = CandidateSet(True, False)
ONLY_3D = CandidateSet(False, True)
BOTH = CandidateSet(True, True)
