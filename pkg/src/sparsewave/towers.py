"""Level-index numbers for quantities like ``exp(exp(R^1.4))``.

A :class:`Tower` stores ``exp^h(y)``: ``h`` nested exponentials applied to a
float ``y``.  For ``h >= 1`` the representation is canonical with
``y > LOG_MAX`` so that ordering is lexicographic in ``(h, y)``.  Only
the operations the eigenvalue check needs are provided; additions and
subtractions of incomparable magnitudes resolve by dominance, which is
exact at the available precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering

LOG_MAX = math.log(1.7976931348623157e308)  # 709.78...


@total_ordering
@dataclass(frozen=True)
class Tower:
    h: int
    y: float

    def __post_init__(self):
        h, y = self.h, float(self.y)
        while h >= 1 and y <= LOG_MAX:
            h, y = h - 1, math.exp(y)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "y", y)

    @classmethod
    def of(cls, x):
        return x if isinstance(x, Tower) else cls(0, float(x))

    @classmethod
    def exp_of(cls, x):
        """``exp(x)`` for a float or tower ``x``."""
        x = cls.of(x)
        if x.h == 0 and x.y <= LOG_MAX:
            return cls(0, math.exp(x.y))
        return cls(x.h + 1, x.y)

    @property
    def positive(self):
        return self.h >= 1 or self.y > 0

    def log(self):
        if self.h == 0:
            if self.y <= 0:
                raise ValueError("log of a nonpositive number")
            return Tower(0, math.log(self.y))
        return Tower(self.h - 1, self.y)

    def exp(self):
        return Tower.exp_of(self)

    def __float__(self):
        return self.y if self.h == 0 else math.inf

    def _key(self):
        return (self.h, self.y) if self.positive else (-1, self.y)

    def __eq__(self, other):
        return self._key() == Tower.of(other)._key()

    def __lt__(self, other):
        return self._key() < Tower.of(other)._key()

    def __hash__(self):
        return hash(self._key())

    def __mul__(self, c):
        """Product with a positive float or a positive tower."""
        if isinstance(c, Tower):
            if self.h == 0 and c.h == 0 and math.isfinite(self.y * c.y):
                return Tower(0, self.y * c.y)
            return (self.log() + c.log()).exp()
        c = float(c)
        if self.h == 0 and math.isfinite(self.y * c):
            return Tower(0, self.y * c)
        if c <= 0:
            raise ValueError("towers are scaled by positive factors only")
        return (self.log() + math.log(c)).exp()

    __rmul__ = __mul__

    def __pow__(self, p):
        if self.h == 0:
            try:
                v = self.y**p
            except OverflowError:
                v = math.inf
            if math.isfinite(v):
                return Tower(0, v)
        return (self.log() * p).exp()

    def __add__(self, other):
        other = Tower.of(other)
        if other.h == 0 and other.y == 0:
            return self
        if self.h == 0 and self.y == 0:
            return other
        if not other.positive:
            return self - Tower(0, -other.y)
        if not self.positive:
            return other - Tower(0, -self.y)
        a, b = (self, other) if self >= other else (other, self)
        if a.h == 0:
            return Tower(0, a.y + b.y)
        # ln(a + b) = ln a + log1p(b / a)
        return (a.log() + math.log1p(ratio(b, a))).exp()

    __radd__ = __add__

    def __neg__(self):
        if self.h != 0:
            raise ValueError("negative towers are not represented")
        return Tower(0, -self.y)

    def __sub__(self, other):
        """``self - other``; the result must be representable (``h = 0`` if negative)."""
        other = Tower.of(other)
        if other.h == 0 and other.y == 0:
            return self
        if not other.positive:
            return self + Tower(0, -other.y)
        if self.h == 0 and other.h == 0:
            return Tower(0, self.y - other.y)
        if self < other:
            raise ValueError("difference is a negative tower")
        r = ratio(other, self)
        if r >= 1.0:
            return Tower(0, 0.0)
        return (self.log() + math.log1p(-r)).exp()

    def __repr__(self):
        return f"Tower(h={self.h}, y={self.y!r})"

    def describe(self):
        """Readable form such as ``exp(exp(1.2e+56))``."""
        s = f"{self.y:.6g}"
        for _ in range(self.h):
            s = f"exp({s})"
        return s


def ratio(b, a):
    """``b / a`` for positive ``b <= a`` as a float (underflows to 0)."""
    if a.h == 0:
        return b.y / a.y
    lb, la = b.log(), a.log()
    if la.h == 0 and lb.h == 0:
        return math.exp(lb.y - la.y)
    d = la - lb
    if d.h == 0:
        return math.exp(-d.y)
    return 0.0


def log_tower(x):
    """Natural log of a positive float or tower, as a tower."""
    return Tower.of(x).log()
