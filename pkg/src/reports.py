"""
Reports module for tsirelson-norms.
Provides the VerifyReport emitted by every verifier and suite, slack
tracking, report merging and the JSON schema shipped in docs/.
"""

import hashlib
import json
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.enclosure import Enclosure, format_rational
from src.errors import SchemaMismatch

EnclosureJSON = Union[str, Dict[str, Union[str, int]]]


class VerifyReport(BaseModel):
    """Outcome of one verifier over a set of instances."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    lemma: str = Field(description="Identifier of the verified estimate")
    instances: int = Field(default=0, ge=0, description="Instances tested")
    worst_slack: Optional[EnclosureJSON] = Field(
        default=None, description="Smallest RHS - LHS seen, as an enclosure"
    )
    passed: bool = Field(default=True, alias="pass", description="Worst slack certainly >= 0")
    witness: Optional[Dict[str, Any]] = Field(default=None, description="Instance with the worst slack")
    seed: Optional[int] = Field(default=None, description="Seed of the randomized run")
    params: Dict[str, Any] = Field(default_factory=dict, description="Parameters of the run")
    sampled: bool = Field(
        default=False, description="True when a cap forced random sampling of families"
    )
    stats: Dict[str, Any] = Field(default_factory=dict, description="Measured constants and ratios")

    def slack(self) -> Optional[Enclosure]:
        return None if self.worst_slack is None else Enclosure.from_json(self.worst_slack)

    def to_json(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)

    def param_hash(self) -> str:
        blob = json.dumps(self.params, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


class SlackTracker:
    """Keeps the worst slack seen by a verifier and the instance it came from."""

    def __init__(self, lemma: str):
        self.lemma = lemma
        self.instances = 0
        self.worst: Optional[Enclosure] = None
        self.witness: Optional[Dict[str, Any]] = None
        self.sampled = False
        self.stats: Dict[str, Any] = {}

    def add(self, slack: Enclosure, witness: Optional[Dict[str, Any]] = None) -> None:
        self.instances += 1
        if self.worst is None or slack.lo < self.worst.lo:
            self.worst = slack
            self.witness = witness

    def record(self, name: str, value: Any) -> None:
        self.stats[name] = _jsonable(value)

    @property
    def passed(self) -> bool:
        return self.worst is None or self.worst.lo >= 0

    def report(self, params: Optional[Dict[str, Any]] = None, seed: Optional[int] = None) -> VerifyReport:
        return VerifyReport(
            lemma=self.lemma,
            instances=self.instances,
            worst_slack=None if self.worst is None else self.worst.to_json(),
            passed=self.passed,
            witness=None if self.witness is None else _jsonable(self.witness),
            seed=seed,
            params=_jsonable(params or {}),
            sampled=self.sampled,
            stats=self.stats,
        )


def _jsonable(value: Any) -> Any:
    if isinstance(value, Enclosure):
        return value.to_json()
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "to_json"):
        return value.to_json()
    return value


def parse_report(data: Any) -> VerifyReport:
    """Validate one report object.

    Raises:
        SchemaMismatch: data does not follow the report schema
    """
    try:
        return VerifyReport.model_validate(data)
    except ValidationError as exc:
        raise SchemaMismatch(f"not a verify report: {exc.errors()[0]['msg']}") from exc


def report_merge(reports: Sequence[Any]) -> dict:
    """Merge reports into rows keyed by (lemma, parameter hash).

    Rows with the same key add their instance counts and keep the worst
    slack; the result also carries a per-lemma pass matrix.
    """
    rows: Dict[tuple, VerifyReport] = {}
    for raw in reports:
        report = raw if isinstance(raw, VerifyReport) else parse_report(raw)
        key = (report.lemma, report.param_hash())
        if key not in rows:
            rows[key] = report.model_copy(deep=True)
            continue
        row = rows[key]
        if row.seed != report.seed:
            raise SchemaMismatch(f"reports for {report.lemma} disagree on the seed")
        row.instances += report.instances
        row.sampled = row.sampled or report.sampled
        row.passed = row.passed and report.passed
        mine, theirs = row.slack(), report.slack()
        if theirs is not None and (mine is None or theirs.lo < mine.lo):
            row.worst_slack = report.worst_slack
            row.witness = report.witness
        row.stats.update(report.stats)

    ordered = [rows[key] for key in sorted(rows)]
    worst: Optional[Enclosure] = None
    matrix: Dict[str, Dict[str, bool]] = {}
    for (lemma, digest), row in zip(sorted(rows), ordered):
        slack = row.slack()
        if slack is not None and (worst is None or slack.lo < worst.lo):
            worst = slack
        matrix.setdefault(lemma, {})[digest] = row.passed
    return {
        "reports": [row.to_json() for row in ordered],
        "instances": sum(row.instances for row in ordered),
        "worst_slack": None if worst is None else worst.to_json(),
        "pass": all(row.passed for row in ordered),
        "matrix": matrix,
    }


def report_schema() -> dict:
    """JSON schema of VerifyReport as shipped in docs/verify_report.schema.json."""
    return VerifyReport.model_json_schema(by_alias=True)


def reports_from_lines(text: str) -> List[dict]:
    """Reports from a JSON array, a single object or one object per line."""
    text = text.strip()
    if not text:
        return []
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        try:
            return [json.loads(line) for line in text.splitlines() if line.strip()]
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"report is not JSON: {exc.msg}") from exc
    if isinstance(data, list):
        return data
    if isinstance(data, dict) and "reports" in data and "matrix" in data:
        return data["reports"]
    return [data]
