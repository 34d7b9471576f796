"""Config loading and output writers (CSV trajectory, JSON-lines dump, JSON summary)."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .scenario import ConfigError, MetricsSummary, ScenarioConfig, TrajectoryRecord, config_from_dict

__all__ = ["load_config", "write_trajectory_csv", "write_ellipsoid_dump", "write_summary", "TRAJECTORY_HEADER"]

TRAJECTORY_HEADER = ["k", "err_norm", "sigma", "sigma_bar", "trace", "rank", "skipped", "aberrant"]


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(doc)


def _g(x) -> str:
    return "%.17g" % x


def write_trajectory_csv(rec: TrajectoryRecord, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for k in range(rec.horizon + 1):
            w.writerow([k, _g(rec.err_norm[k]), _g(rec.sigma[k]), _g(rec.sigma_bar[k]), _g(rec.trace[k]),
                        int(rec.rank[k]), int(rec.skipped[k]), int(rec.aberrant[k])])


def write_ellipsoid_dump(rec: TrajectoryRecord, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for k in range(rec.horizon + 1):
            obj = {"k": k, "c": rec.x_hat[k].tolist(), "P": rec.P[k].tolist(), "sigma": float(rec.sigma[k])}
            fh.write(json.dumps(obj) + "\n")


def write_summary(summary: MetricsSummary, path, timing: bool = True, extra: dict | None = None) -> None:
    doc = summary.as_dict(timing)
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
