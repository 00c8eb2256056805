"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines, or use
``dissgadgets acceptance``.
"""

from dissgadgets import checks

CRITERIA = dict(checks.ACCEPTANCE)


def run_criterion(prefix):
    (name,) = [n for n in CRITERIA if n.startswith(prefix)]
    result = checks._timed(name, CRITERIA[name])
    print(result.line())
    return result


class TestAcceptance:
    def test_01_classical_reduction_equivalence(self):
        assert run_criterion("01").passed

    def test_02_initializer_overlap_closed_form(self):
        assert run_criterion("02").passed

    def test_03_timer_occupation_equality(self):
        assert run_criterion("03").passed

    def test_04_cutoff_remainder_scaling(self):
        assert run_criterion("04").passed

    def test_05_sharp_threshold(self):
        assert run_criterion("05").passed

    def test_06_concatenation_bounds(self):
        assert run_criterion("06").passed

    def test_07_initializer_certificate(self):
        assert run_criterion("07").passed

    def test_08_truncated_normal_bound(self):
        assert run_criterion("08").passed

    def test_09_imperfect_initialization(self):
        assert run_criterion("09").passed

    def test_10_state_transfer(self):
        assert run_criterion("10").passed

    def test_11_timer_triggered_composite(self):
        assert run_criterion("11").passed
