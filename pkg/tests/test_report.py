import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from scalekit import VerificationReport, VerificationRow


class TestRow:
    def test_judge(self):
        assert VerificationRow.judge("a", "x", 1.0, 1.05, 0.1).passed
        assert not VerificationRow.judge("a", "x", 1.0, 1.2, 0.1).passed
        assert VerificationRow.judge("a", "x", 1.0, 1.1, 0.1).discrepancy == pytest.approx(0.1)

    @pytest.mark.parametrize("vals", [(math.nan, 1.0, 1.0), (1.0, math.inf, 1.0),
                                      (1.0, 1.0, math.inf), (1.0, 1.0, math.nan)])
    def test_non_finite_fails(self, vals):
        assert VerificationRow.judge("a", "x", *vals).verdict == "fail"

    def test_failure_row(self):
        r = VerificationRow.failure("task 01_exit", "ValueError: boom")
        assert not r.passed and r.anchor == "ValueError: boom"

    def test_bad_verdict(self):
        with pytest.raises(ValueError):
            VerificationRow("a", "x", 1.0, 1.0, 0.0, "maybe")


class TestReport:
    def test_summary(self):
        rep = VerificationReport([VerificationRow.judge("a", "x", 1, 1, 0),
                                  VerificationRow.judge("b", "x", 1, 2, 0)])
        assert rep.summary == {"total": 2, "passed": 1, "failed": 1}
        assert not rep.all_passed
        assert VerificationReport().all_passed

    def test_strict_json(self):
        rep = VerificationReport([VerificationRow.failure("t", "boom")])
        text = rep.to_json()
        json.loads(text, parse_constant=lambda c: pytest.fail(f"non-standard constant {c}"))
        back = VerificationReport.from_json(text)
        assert math.isnan(back.rows[0].analytic)

    def test_rejects_inconsistent(self):
        rep = VerificationReport([VerificationRow.judge("a", "x", 1, 1, 0)])
        data = rep.to_dict()
        data["summary"]["failed"] = 1
        with pytest.raises(ValueError):
            VerificationReport.from_json(json.dumps(data))
        data = rep.to_dict()
        data["rows"][0]["extra"] = 1
        with pytest.raises(ValueError):
            VerificationReport.from_json(json.dumps(data))
        data = rep.to_dict()
        data["rows"][0]["budget"] = "lots"
        with pytest.raises(ValueError):
            VerificationReport.from_json(json.dumps(data))

    def test_write(self, tmp_path):
        rep = VerificationReport([VerificationRow.judge("a", "x", 0.1, 0.3, 0.25)])
        rep.write(tmp_path / "r.json")
        assert (tmp_path / "r.json").read_text() == rep.to_json()


floats = st.floats(allow_nan=True, allow_infinity=True)
rows = st.builds(VerificationRow.judge, st.text(), st.text(), floats, floats, floats)


@given(st.lists(rows, max_size=6))
def test_round_trip(rs):
    rep = VerificationReport(rs)
    text = rep.to_json()
    back = VerificationReport.from_json(text)
    assert back.to_json() == text
    for a, b in zip(rep.rows, back.rows):
        for key in ("analytic", "oracle", "budget"):
            x, y = getattr(a, key), getattr(b, key)
            assert (math.isnan(x) and math.isnan(y)) or x == y
        assert (a.identity, a.anchor, a.verdict) == (b.identity, b.anchor, b.verdict)
