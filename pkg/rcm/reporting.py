"""
Benchmark rows and the per-band trajectory / active-context report.
"""
import csv
import io
from dataclasses import asdict, dataclass, fields
from statistics import mean
from typing import Dict, Iterable, List, Sequence, Tuple

from .exceptions import ReportError


@dataclass(frozen=True)
class BenchRow:
    instance_id: str
    band: str
    verdict: str
    oracle_verdict: str
    trajectory_tokens: int
    max_active_context: int
    max_depth: int
    steps: int
    wall_time: float

    @property
    def agrees(self) -> bool:
        return self.verdict == self.oracle_verdict


COLUMNS = tuple(f.name for f in fields(BenchRow))
SUMMARY_COLUMNS = ("band", "instances", "accuracy", "mean_trajectory", "mean_active_context", "ratio")


def _band_order(rows: Sequence[BenchRow]) -> List[str]:
    from .sat import BANDS

    known = [name for name, _, _ in BANDS]
    seen = {row.band for row in rows}
    return [b for b in known if b in seen] + sorted(seen - set(known))


def summarize(rows: Sequence[BenchRow]) -> List[Dict[str, object]]:
    summary = []
    for band in _band_order(rows):
        members = [row for row in rows if row.band == band]
        trajectory = mean(row.trajectory_tokens for row in members)
        active = mean(row.max_active_context for row in members)
        summary.append({
            "band": band,
            "instances": len(members),
            "accuracy": sum(row.agrees for row in members) / len(members),
            "mean_trajectory": trajectory,
            "mean_active_context": active,
            "ratio": trajectory / active if active else float("inf"),
        })
    return summary


def _csv(header: Sequence[str], records: Iterable[Sequence[object]]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(records)
    return out.getvalue()


def report(rows: Sequence[BenchRow]) -> Tuple[str, str]:
    """CSV of the rows and a CSV summary with one line per band."""
    if not rows:
        raise ReportError("cannot report on an empty benchmark")
    table = _csv(COLUMNS, ([getattr(row, c) for c in COLUMNS] for row in rows))
    summary = _csv(SUMMARY_COLUMNS, (
        [entry["band"], entry["instances"], f"{entry['accuracy']:.3f}",
         f"{entry['mean_trajectory']:.2f}", f"{entry['mean_active_context']:.2f}", f"{entry['ratio']:.3f}"]
        for entry in summarize(rows)
    ))
    return table, summary


def parse_report(text: str) -> List[BenchRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != COLUMNS:
        raise ReportError(f"unexpected report columns: {reader.fieldnames}")
    rows = []
    for record in reader:
        try:
            rows.append(BenchRow(
                instance_id=record["instance_id"],
                band=record["band"],
                verdict=record["verdict"],
                oracle_verdict=record["oracle_verdict"],
                trajectory_tokens=int(record["trajectory_tokens"]),
                max_active_context=int(record["max_active_context"]),
                max_depth=int(record["max_depth"]),
                steps=int(record["steps"]),
                wall_time=float(record["wall_time"]),
            ))
        except ValueError as exc:
            raise ReportError(f"bad report row {record}: {exc}") from exc
    return rows


def row_dict(row: BenchRow) -> Dict[str, object]:
    return asdict(row)
