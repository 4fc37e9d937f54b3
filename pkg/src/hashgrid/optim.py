"""Adam with per-group L2 and zero-gradient skipping, plus a step-decay schedule."""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-15
    l2: float = 1e-6

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.eps <= 0 or self.lr <= 0:
            raise ValueError("lr and eps must be positive")


@dataclass
class ParamGroup:
    """A flat parameter buffer, its gradient accumulator and Adam moments."""

    name: str
    params: np.ndarray
    grads: np.ndarray
    apply_l2: bool = False
    skip_zero_grad: bool = False
    m: np.ndarray = None
    v: np.ndarray = None

    def __post_init__(self):
        if self.params.shape != self.grads.shape or self.params.ndim != 1:
            raise ValueError(f"group {self.name!r}: params and grads must be equal-length 1-D arrays")
        if self.m is None:
            self.m = np.zeros_like(self.params)
        if self.v is None:
            self.v = np.zeros_like(self.params)


@dataclass
class AdamState:
    groups: list[ParamGroup]
    step: int = 0
    touched: dict = field(default_factory=dict)

    def group(self, name: str) -> ParamGroup:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)


class NonFiniteGradient(FloatingPointError):
    def __init__(self, group: str):
        super().__init__(f"non-finite gradient in parameter group {group!r}")
        self.group = group


def adam_step(state: AdamState, hyper: AdamHyper, lr_now: float | None = None,
              n_threads: int = 1) -> AdamState:
    """Update every group in place and zero its gradients.

    Entries of a ``skip_zero_grad`` group whose gradient is exactly 0.0 keep
    their parameter and moments untouched. The step counter is global, so
    bias correction uses it even for entries that were skipped before.
    """
    for g in state.groups:
        if not np.all(np.isfinite(g.grads)):
            raise NonFiniteGradient(g.name)
    lr = hyper.lr if lr_now is None else lr_now
    state.step += 1
    t = state.step
    bias1 = 1.0 - hyper.beta1**t
    bias2 = 1.0 - hyper.beta2**t
    for g in state.groups:
        l2 = hyper.l2 if g.apply_l2 else 0.0
        state.touched[g.name] = kernels.adam_update(
            g.params, g.grads, g.m, g.v, lr, hyper.beta1, hyper.beta2, hyper.eps, l2,
            bias1, bias2, g.skip_zero_grad, n_threads)
    return state


@dataclass(frozen=True)
class LrSchedule:
    milestones: tuple = ()
    factor: float = 0.33

    def __post_init__(self):
        ms = tuple(int(m) for m in self.milestones)
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ValueError("milestones must be strictly increasing")
        if not 0 < self.factor <= 1:
            raise ValueError("decay factor must lie in (0, 1]")
        object.__setattr__(self, "milestones", ms)

    @classmethod
    def scaled(cls, total_steps: int, first: float = 0.65, every: float = 0.30,
               factor: float = 0.33) -> "LrSchedule":
        """Decay at ``first * total`` and every further ``every * total`` steps before the end."""
        ms = []
        s = first * total_steps
        while s < total_steps and total_steps > 0:
            ms.append(int(round(s)))
            s += every * total_steps
        return cls(tuple(sorted(set(ms))), factor)

    @classmethod
    def repeating(cls, first: int, every: int, total_steps: int, factor: float = 0.33):
        return cls(tuple(range(first, total_steps + 1, every)), factor)


def lr_at(schedule: LrSchedule, base_lr: float, step: int) -> float:
    if step < 0:
        raise ValueError("step must be >= 0")
    n = bisect.bisect_right(schedule.milestones, step)
    return base_lr * schedule.factor**n
