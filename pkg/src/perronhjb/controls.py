"""Time-dependent and feedback control signals."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ValidationError

KINDS = ("constant", "periodic", "sampled", "feedback")
INTERP = ("left", "linear", "exact")
MIN_PERIODIC_SAMPLES = 8


@dataclass(frozen=True)
class ControlSignal:
    """A control ``alpha(t)`` or feedback ``alpha(y)``.

    Use the constructors (:meth:`constant`, :meth:`periodic`, ...) rather
    than building instances directly.

    Attributes
    ----------
    kind : {"constant", "periodic", "sampled", "feedback"}
    values : ndarray
        Samples. For ``periodic`` they sit at ``k theta / n``; for ``sampled``
        at ``times``.
    times : ndarray or None
    theta : float or None
        Period.
    interp : {"left", "linear", "exact"}
        ``left`` is piecewise constant, continuous from the right at the
        sample times. ``exact`` evaluates ``fn`` (periodic kind only).
    fn, policy : callables
        Exact periodic profile ``fn(t)`` and feedback ``policy(y)``.
    """

    kind: str
    values: np.ndarray
    times: Optional[np.ndarray] = None
    theta: Optional[float] = None
    interp: str = "left"
    fn: Optional[Callable] = field(default=None, compare=False)
    policy: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown control kind {self.kind!r}")
        if self.interp not in INTERP:
            raise ValidationError(f"unknown interpolation {self.interp!r}")
        v = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValidationError("control values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.times is not None:
            t = np.array(self.times, dtype=float).ravel()
            t.setflags(write=False)
            object.__setattr__(self, "times", t)
        if self.kind == "periodic":
            if self.theta is None or not self.theta > 0:
                raise ValidationError("periodic control needs theta > 0")
            if v.size < MIN_PERIODIC_SAMPLES:
                raise ValidationError(
                    f"periodic control needs >= {MIN_PERIODIC_SAMPLES} samples per period")
            if self.interp == "exact" and self.fn is None:
                raise ValidationError("exact interpolation needs fn")
        if self.kind == "sampled":
            t = self.times
            if t is None or t.size != v.size or t.size == 0:
                raise ValidationError("sampled control needs matching times and values")
            if np.any(np.diff(t) <= 0):
                raise ValidationError("sample times must be strictly increasing")
        if self.kind == "feedback" and self.policy is None:
            raise ValidationError("feedback control needs a policy")

    # ---- constructors

    @classmethod
    def constant(cls, alpha: float) -> "ControlSignal":
        return cls("constant", [alpha])

    @classmethod
    def periodic(cls, values, theta: float, interp: str = "left") -> "ControlSignal":
        if interp == "exact":
            raise ValidationError("use periodic_fn for exact profiles")
        return cls("periodic", values, theta=float(theta), interp=interp)

    @classmethod
    def periodic_fn(cls, fn: Callable, theta: float, n_samples: int = 64) -> "ControlSignal":
        """Smooth periodic profile evaluated exactly; ``fn`` must accept arrays."""
        t = np.arange(n_samples) * theta / n_samples
        return cls("periodic", fn(t), theta=float(theta), interp="exact", fn=fn)

    @classmethod
    def sampled(cls, times, values, interp: str = "left") -> "ControlSignal":
        return cls("sampled", values, times=times, interp=interp)

    @classmethod
    def feedback(cls, policy: Callable) -> "ControlSignal":
        return cls("feedback", [0.0], policy=policy)

    @classmethod
    def square_wave(cls, low: float, high: float, theta: float = 1.0,
                    n_samples: int = MIN_PERIODIC_SAMPLES) -> "ControlSignal":
        """``low`` on the first half period, ``high`` on the second."""
        if n_samples % 2:
            raise ValidationError("square wave needs an even number of samples")
        half = n_samples // 2
        return cls.periodic(np.r_[np.full(half, low), np.full(half, high)], theta)

    @classmethod
    def sine(cls, mean: float = 0.0, amplitude: float = 1.0, theta: float = 1.0,
             phase: float = 0.0) -> "ControlSignal":
        w = 2 * np.pi / theta
        return cls.periodic_fn(lambda t: mean + amplitude * np.sin(w * np.asarray(t) + phase), theta)

    # ---- evaluation

    @property
    def is_feedback(self) -> bool:
        return self.kind == "feedback"

    def value(self, t):
        """Evaluate at time(s) ``t``; feedback signals need :meth:`at`."""
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full(t.shape, self.values[0]) if t.ndim else float(self.values[0])
        if self.kind == "feedback":
            raise ValidationError("feedback control needs a state; use at(t, y)")
        if self.kind == "periodic":
            tau = np.mod(t, self.theta)
            if self.interp == "exact":
                out = np.asarray(self.fn(tau), dtype=float)
            else:
                n = self.values.size
                x = tau / self.theta * n
                if self.interp == "left":
                    k = np.clip(np.floor(x + 1e-12).astype(int), 0, n - 1)
                    out = self.values[k]
                else:
                    ext = np.r_[self.values, self.values[0]]
                    out = np.interp(x, np.arange(n + 1), ext)
        else:
            if self.interp == "left":
                k = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, None)
                out = self.values[k]
            else:
                out = np.interp(t, self.times, self.values)
        return out if np.ndim(out) else float(out)

    __call__ = value

    def at(self, t: float, y=None) -> float:
        if self.kind == "feedback":
            return float(self.policy(y))
        return float(self.value(t))

    def breakpoints(self, t0: float, t1: float) -> np.ndarray:
        """Times in ``(t0, t1)`` where the signal or its slope may jump."""
        if self.kind in ("constant", "feedback") or (self.kind == "periodic" and self.interp == "exact"):
            return np.empty(0)
        if self.kind == "sampled":
            pts = self.times
        else:
            n = self.values.size
            if self.interp == "left":
                jumps = np.flatnonzero(self.values != np.roll(self.values, 1))
            else:
                jumps = np.arange(n)
            base = jumps * self.theta / n
            k0 = int(np.floor(t0 / self.theta)) - 1
            k1 = int(np.ceil(t1 / self.theta)) + 1
            pts = (base[None, :] + self.theta * np.arange(k0, k1)[:, None]).ravel()
        pts = np.sort(pts[(pts > t0) & (pts < t1)])
        return pts

    def mean(self) -> float:
        """Average over one period (periodic) or the value (constant)."""
        if self.kind == "constant":
            return float(self.values[0])
        if self.kind != "periodic":
            raise ValidationError("mean is defined for constant and periodic controls")
        if self.interp in ("left", "linear"):
            return float(np.mean(self.values))
        x, w = np.polynomial.legendre.leggauss(16)
        edges = np.linspace(0.0, self.theta, 257)
        h = np.diff(edges)
        s = edges[:-1, None] + 0.5 * h[:, None] * (x + 1)
        return float(np.sum(0.5 * h[:, None] * w * self.fn(s)) / self.theta)

    def affine(self, shift: float, scale: float = 1.0) -> "ControlSignal":
        """The signal ``shift + scale * self`` (same kind and grid)."""
        if self.kind == "feedback":
            pol = self.policy
            return ControlSignal.feedback(lambda y: shift + scale * pol(y))
        fn = None
        if self.fn is not None:
            f0 = self.fn
            fn = lambda t: shift + scale * np.asarray(f0(t))  # noqa: E731
        return ControlSignal(self.kind, shift + scale * self.values, self.times,
                             self.theta, self.interp, fn=fn)

    def check_bounds(self, a: float, A: float, slack: float = 0.0) -> None:
        """Raise unless sampled values lie in ``[a - slack, A + slack]``."""
        if self.kind == "feedback":
            return
        v = self.values
        if self.kind == "periodic" and self.interp == "exact":
            v = self.fn(np.linspace(0.0, self.theta, 1025))
        if np.min(v) < a - slack - 1e-12 or np.max(v) > A + slack + 1e-12:
            raise ValidationError(
                f"control values [{np.min(v)}, {np.max(v)}] leave [{a - slack}, {A + slack}]")
