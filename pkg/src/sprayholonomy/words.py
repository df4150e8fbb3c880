"""Provenance trees for iterated Lie brackets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class BracketWord:
    """Leaf (``label`` set) or bracket node (``left``/``right`` set).

    Frame generators are labelled ``h1 .. hn``; ``C`` and ``S`` label the
    Liouville and spray fields.
    """

    label: Optional[str] = None
    left: Optional["BracketWord"] = None
    right: Optional["BracketWord"] = None

    @classmethod
    def generator(cls, i: int) -> "BracketWord":
        return cls(label=f"h{i}")

    @classmethod
    def leaf(cls, label: str) -> "BracketWord":
        return cls(label=label)

    @classmethod
    def bracket(cls, left: "BracketWord", right: "BracketWord") -> "BracketWord":
        return cls(left=left, right=right)

    @property
    def is_leaf(self) -> bool:
        return self.label is not None

    @property
    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth, self.right.depth)

    def generators(self) -> list[str]:
        if self.is_leaf:
            return [self.label]
        return self.left.generators() + self.right.generators()

    def validate(self, n: int) -> None:
        for g in self.generators():
            if g.startswith("h") and not 1 <= int(g[1:]) <= n:
                raise ValueError(f"generator {g} outside h1..h{n}")

    def __str__(self) -> str:
        if self.is_leaf:
            return self.label
        return f"[{self.left},{self.right}]"
