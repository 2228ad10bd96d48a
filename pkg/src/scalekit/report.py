"""Verification rows and the JSON report."""
from dataclasses import asdict, dataclass
import json
import math

_FIELDS = ("identity", "anchor", "analytic", "oracle", "budget", "verdict")
_NUMERIC = ("analytic", "oracle", "budget")
# strict JSON has no non-finite numbers; these strings stand in for them
_NONFINITE = {"NaN": math.nan, "Infinity": math.inf, "-Infinity": -math.inf}


def _encode(value):
    if math.isfinite(value):
        return value
    return "NaN" if math.isnan(value) else ("Infinity" if value > 0 else "-Infinity")


def _decode(value):
    if isinstance(value, str):
        if value not in _NONFINITE:
            raise ValueError(f"bad numeric field {value!r}")
        return _NONFINITE[value]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"bad numeric field {value!r}")
    return float(value)


@dataclass(frozen=True)
class VerificationRow:
    """One checked identity: ``verdict`` is ``"pass"`` iff ``|analytic - oracle| <= budget``.

    Non-finite values, including an infinite budget, fail.
    """

    identity: str
    anchor: str
    analytic: float
    oracle: float
    budget: float
    verdict: str

    def __post_init__(self):
        if self.verdict not in ("pass", "fail"):
            raise ValueError("verdict must be 'pass' or 'fail'")

    @classmethod
    def judge(cls, identity, anchor, analytic, oracle, budget):
        analytic, oracle, budget = float(analytic), float(oracle), float(budget)
        finite = all(math.isfinite(v) for v in (analytic, oracle, budget))
        ok = finite and abs(analytic - oracle) <= budget
        return cls(identity, anchor, analytic, oracle, budget, "pass" if ok else "fail")

    @classmethod
    def failure(cls, identity, message):
        """Row recording a task that raised instead of producing values."""
        return cls(identity, message, math.nan, math.nan, math.nan, "fail")

    @property
    def passed(self):
        return self.verdict == "pass"

    @property
    def discrepancy(self):
        return abs(self.analytic - self.oracle)


@dataclass
class VerificationReport:
    rows: list

    def __init__(self, rows=()):
        self.rows = list(rows)

    def extend(self, rows):
        self.rows.extend(rows)

    @property
    def summary(self):
        passed = sum(r.passed for r in self.rows)
        return {"total": len(self.rows), "passed": passed, "failed": len(self.rows) - passed}

    @property
    def all_passed(self):
        return all(r.passed for r in self.rows)

    def to_dict(self):
        rows = []
        for r in self.rows:
            row = asdict(r)
            for key in _NUMERIC:
                row[key] = _encode(row[key])
            rows.append(row)
        return {"rows": rows, "summary": self.summary}

    def to_json(self):
        # floats go through repr, so the text round-trips exactly
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        rows = []
        for raw in data["rows"]:
            if set(raw) != set(_FIELDS):
                raise ValueError(f"report row has fields {sorted(raw)}")
            for key in _NUMERIC:
                raw[key] = _decode(raw[key])
            rows.append(VerificationRow(**raw))
        report = cls(rows)
        if data.get("summary", report.summary) != report.summary:
            raise ValueError("report summary does not match its rows")
        return report

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())
