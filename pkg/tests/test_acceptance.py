"""Acceptance gate: every shipped criterion runs at its stated tolerance.

Each criterion prints one PASS/FAIL line; the suite shares cached payoff
tables across criteria, so ordering within this module matters for speed but
not for correctness.
"""

import pytest

from peerspot.acceptance import CRITERIA


@pytest.mark.parametrize("cid,description,check", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_acceptance_criterion(cid, description, check):
    passed, detail = check()
    print(f"{'PASS' if passed else 'FAIL'} [{cid}] {description}: {detail}")
    assert passed, f"[{cid}] {description}: {detail}"
