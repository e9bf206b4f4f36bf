"""Base class for all warping profiles."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from abc import ABC, abstractmethod
from typing import Any

import numpy as np

from warpbench.models import ProfileKind

ArrayLike = np.ndarray | float


class WarpingProfile(ABC):
    """A smooth warping function w with w(0) = 0, w'(0) = 1 and power-law tail metadata.

    The metric of the model manifold is dr² + w(r)² g_sphere. Subclasses
    provide w and its first two derivatives; the defaults for the pole
    expansion and the cancellation-free 1 - w'² may be overridden.
    """

    kind: ProfileKind

    def __init__(self, tail_exponent: float, tail_coefficient: float):
        self.tail_exponent = float(tail_exponent)  # p in w ~ c·r^p; inf for exponential growth
        self.tail_coefficient = float(tail_coefficient)

    @abstractmethod
    def w(self, r: ArrayLike) -> ArrayLike:
        ...

    @abstractmethod
    def dw(self, r: ArrayLike) -> ArrayLike:
        ...

    @abstractmethod
    def d2w(self, r: ArrayLike) -> ArrayLike:
        ...

    @abstractmethod
    def params(self) -> dict[str, Any]:
        ...

    def one_minus_dw2(self, r: ArrayLike) -> ArrayLike:
        return 1.0 - self.dw(r) ** 2

    @property
    def d3w0(self) -> float | None:
        """w'''(0), or None when the profile has no pole expansion."""
        return None

    def max_radius(self, n: int) -> float:
        """Largest radius at which w^{n-1} is representable in double precision."""
        return math.inf

    def with_tail(self, p: float | None = None, c: float | None = None) -> WarpingProfile:
        clone = copy.copy(self)
        if p is not None:
            clone.tail_exponent = float(p)
        if c is not None:
            clone.tail_coefficient = float(c)
        return clone

    def describe(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            **self.params(),
            "tail_exponent": self.tail_exponent,
            "tail_coefficient": self.tail_coefficient,
        }

    def fingerprint(self) -> str:
        payload = json.dumps(self.describe(), sort_keys=True, default=repr)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"
