"""Shared training loop: batch -> loss -> backward -> Adam, with periodic evaluation."""
from __future__ import annotations

import time

import numpy as np

from ..model import NeuralField
from ..optim import AdamHyper, AdamState, LrSchedule, NonFiniteGradient, adam_step, lr_at
from .report import TrainReport


class TrainingError(RuntimeError):
    def __init__(self, step: int, reason: str):
        super().__init__(f"training failed at step {step}: {reason}")
        self.step = step


class Trainer:
    """Subclasses supply ``sample_batch()`` and ``evaluate()``.

    ``report`` gets a row at step 0 (before any update), every ``log_interval``
    steps and at ``total_steps``. The loss column holds the loss of the most
    recent training batch; at step 0 that is the batch about to be trained on.
    Only training time is counted in ``time_s``.
    """

    metric_name = "metric"

    def __init__(self, model: NeuralField, loss_fn, hyper: AdamHyper, schedule: LrSchedule,
                 total_steps: int, log_interval: int, n_threads: int = 1):
        if total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if log_interval < 1:
            raise ValueError("log_interval must be >= 1")
        self.model = model
        self.loss_fn = loss_fn
        self.hyper = hyper
        self.schedule = schedule
        self.total_steps = int(total_steps)
        self.log_interval = int(log_interval)
        self.n_threads = int(n_threads)
        self.opt = AdamState(model.param_groups())
        self.report = TrainReport(self.metric_name)
        self.step = 0
        self.elapsed = 0.0
        self.last_loss = float("nan")
        self._pending = None
        self.on_log = None

    def sample_batch(self):
        raise NotImplementedError

    def evaluate(self) -> float:
        raise NotImplementedError

    def _next_batch(self):
        if self._pending is not None:
            batch, self._pending = self._pending, None
            return batch
        return self.sample_batch()

    def batch_loss(self, X, target, need_grad: bool = True):
        out, cache = self.model.forward(X, need_grad, self.n_threads)
        loss, grad = self.loss_fn(out, target)
        return loss, grad, cache

    def train_step(self) -> float:
        X, target = self._next_batch()
        loss, grad, cache = self.batch_loss(X, target)
        if not np.isfinite(loss):
            raise TrainingError(self.step + 1, "non-finite loss")
        self.model.backward(cache, grad, self.n_threads)
        try:
            adam_step(self.opt, self.hyper, lr_at(self.schedule, self.hyper.lr, self.step),
                      self.n_threads)
        except NonFiniteGradient as exc:
            raise TrainingError(self.step + 1, str(exc)) from None
        self.step += 1
        self.last_loss = loss
        return loss

    def current_lr(self) -> float:
        return lr_at(self.schedule, self.hyper.lr, self.step)

    def _log(self):
        self.report.log(self.step, self.elapsed, self.last_loss, self.evaluate(), self.current_lr())
        if self.on_log is not None:
            self.on_log(self.report.rows[-1])

    def run(self, until: int | None = None) -> TrainReport:
        """Train up to ``until`` (default ``total_steps``); resumable from any step."""
        stop = self.total_steps if until is None else min(int(until), self.total_steps)
        if self.step == 0 and not self.report.rows:
            self._pending = self.sample_batch()
            self.last_loss = self.batch_loss(*self._pending, need_grad=False)[0]
            self._log()
        while self.step < stop:
            t0 = time.perf_counter()
            self.train_step()
            self.elapsed += time.perf_counter() - t0
            if self.step % self.log_interval == 0 or self.step == self.total_steps:
                self._log()
        return self.report

    # state that is not part of the model or optimizer moments
    def rng_state(self) -> dict:
        raise NotImplementedError

    def set_rng_state(self, st: dict):
        raise NotImplementedError

    def extra_state(self) -> dict:
        return {
            "step": self.step,
            "elapsed": self.elapsed,
            "last_loss": self.last_loss,
            "rows": [list(r) for r in self.report.rows],
            "rng": self.rng_state(),
            "pending": self._pending is not None,
        }

    def load_extra_state(self, st: dict):
        self.step = int(st["step"])
        self.elapsed = float(st["elapsed"])
        self.last_loss = float(st["last_loss"])
        self.report.rows = [tuple([int(r[0])] + [float(v) for v in r[1:]]) for r in st["rows"]]
        self.set_rng_state(st["rng"])
        if st.get("pending"):
            raise ValueError("cannot resume a checkpoint taken before the first step")


def seed_streams(seed: int, n: int):
    """Independent numpy generators for init, tables and batching."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(int(seed)).spawn(n)]
