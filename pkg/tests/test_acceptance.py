"""One test per acceptance criterion; each prints its PASS/FAIL line."""

import pytest

from improvepac.acceptance import CRITERIA

RESULTS: dict = {}


@pytest.mark.parametrize("cid", sorted(CRITERIA), ids=lambda c: f"C{c:02d}")
def test_criterion(cid):
    result = CRITERIA[cid]()
    RESULTS[cid] = result
    print(result.line())
    assert result.passed, result.line()


if __name__ == "__main__":
    for cid in sorted(CRITERIA):
        print(CRITERIA[cid]().line())
