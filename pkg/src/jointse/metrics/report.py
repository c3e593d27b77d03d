"""Per-utterance metric tables with mean +- std summaries."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .basic import aggregate

# Direction in which a metric improves, used to mark the best run.
HIGHER_IS_BETTER = {"estoi": True, "srmr": True, "snr": True, "dnsmos": True, "wer": False}
KNOWN_METRICS = tuple(HIGHER_IS_BETTER)


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float
    utterance_id: str

    def __post_init__(self):
        if self.name not in KNOWN_METRICS:
            raise ValueError(f"unknown metric {self.name!r}")
        if not math.isfinite(self.value):
            raise ValueError(f"{self.name} for {self.utterance_id} is not finite")


@dataclass
class MetricReport:
    metrics: list[str]
    rows: list[dict] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)
    label: str = ""

    def add(self, utterance_id: str, values: dict[str, float | None]) -> None:
        row = {"utterance_id": utterance_id}
        for name in self.metrics:
            row[name] = values.get(name)
        self.rows.append(row)

    def column(self, name: str) -> list[float]:
        return [r[name] for r in self.rows if r.get(name) is not None]

    def summary(self) -> dict[str, dict]:
        out = {}
        for name in self.metrics:
            col = self.column(name)
            if not col:
                continue
            mean, std = aggregate(col)
            out[name] = {"mean": mean, "std": std, "n": len(col),
                         "formatted": f"{mean:.2f} ± {std:.2f}"}
        return out

    def sorted_rows(self) -> list[dict]:
        return sorted(self.rows, key=lambda r: r["utterance_id"])

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["utterance_id", *self.metrics])
            for row in self.sorted_rows():
                writer.writerow([row["utterance_id"],
                                 *("" if row[m] is None else repr(float(row[m])) for m in self.metrics)])

    def write_summary(self, path: str | Path, extra: dict | None = None) -> None:
        payload = {"label": self.label, "metrics": self.summary(), "n_utterances": len(self.rows),
                   "failures": dict(sorted(self.failures.items()))}
        if extra:
            payload.update(extra)
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                              encoding="utf-8")


def read_results_csv(path: str | Path) -> MetricReport:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        report = MetricReport(metrics=header[1:])
        for row in reader:
            report.add(row[0], {m: (float(v) if v != "" else None) for m, v in zip(header[1:], row[1:])})
    return report
