"""Consistency checks between a TCF1 feature file and its source dataset.

Checks the magic and header, that record ids appear in dataset order
(records for skipped examples may be absent, extras may not), and that
columns past each example's token count are exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dataset import load_examples
from .tcf import TcfError, read_header, read_records


@dataclass
class VerifyReport:
    records: int = 0
    dataset_size: int = 0
    missing: int = 0
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def summary(self) -> str:
        status = "OK" if self.ok else "FAIL"
        lines = [f"{status}: {self.records} records, "
                 f"{self.dataset_size} dataset examples, {self.missing} missing"]
        lines.extend(self.problems[:20])
        if len(self.problems) > 20:
            lines.append(f"... and {len(self.problems) - 20} more problems")
        return "\n".join(lines)


def verify(feature_path, data_path, format: str = "tsv_labeled") -> VerifyReport:
    report = VerifyReport()
    examples = load_examples(data_path, format)
    report.dataset_size = len(examples)
    by_id = {ex.id: ex for ex in examples}
    order = {ex.id: i for i, ex in enumerate(examples)}

    try:
        with open(feature_path, "rb") as f:
            header = read_header(f)
    except (TcfError, OSError) as e:
        report.problems.append(str(e))
        return report

    last_pos = -1
    try:
        for rec_id, arr in read_records(feature_path):
            report.records += 1
            ex = by_id.get(rec_id)
            if ex is None:
                report.problems.append(f"record {rec_id!r} not in dataset")
                continue
            pos = order[rec_id]
            if pos <= last_pos:
                report.problems.append(f"record {rec_id!r} out of dataset order")
            last_pos = max(last_pos, pos)
            n = min(len(ex.tokens), header.seq_len)
            if arr[:, n:].any():
                report.problems.append(f"record {rec_id!r}: nonzero padding columns")
    except TcfError as e:
        report.problems.append(str(e))
        return report

    report.missing = report.dataset_size - report.records
    if report.records > report.dataset_size:
        report.problems.append("more records than dataset examples")
    return report
