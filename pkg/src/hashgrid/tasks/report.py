"""Training logs and their CSV form."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

COLUMNS = ("step", "time_s", "loss", "metric", "lr")


@dataclass
class TrainReport:
    metric_name: str = "metric"
    rows: list = field(default_factory=list)  # (step, time_s, loss, metric, lr)

    def log(self, step: int, time_s: float, loss: float, metric: float, lr: float):
        if self.rows:
            if step <= self.rows[-1][0]:
                raise ValueError("logged steps must be strictly increasing")
            time_s = max(time_s, self.rows[-1][1])
        self.rows.append((int(step), float(time_s), float(loss), float(metric), float(lr)))

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list:
        i = COLUMNS.index(name)
        return [r[i] for r in self.rows]

    @property
    def final_metric(self) -> float:
        return self.rows[-1][3]

    @property
    def final_loss(self) -> float:
        return self.rows[-1][2]

    def deterministic_rows(self) -> list:
        """Rows without wall time, the part that must reproduce exactly."""
        return [(s, l, m, r) for s, _, l, m, r in self.rows]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            for r in self.rows:
                w.writerow([r[0], f"{r[1]:.6f}", repr(r[2]), repr(r[3]), repr(r[4])])

    @classmethod
    def from_csv(cls, path, metric_name: str = "metric") -> "TrainReport":
        rep = cls(metric_name)
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd, None)
            if tuple(header or ()) != COLUMNS:
                raise ValueError(f"{Path(path).name}: expected header {','.join(COLUMNS)}")
            for row in rd:
                rep.rows.append((int(row[0]), float(row[1]), float(row[2]), float(row[3]),
                                 float(row[4])))
        return rep
