"""The eleven exit criteria, each at its stated tolerance and time budget."""
import json

import pytest

from hbernstein.battery import CRITERIA, run_battery

pytestmark = pytest.mark.acceptance


@pytest.mark.parametrize("key", [k for k, *_ in CRITERIA])
def test_criterion(key, capsys):
    (res,) = run_battery([key])
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, json.dumps(res.measurements, indent=1, default=str)
    assert res.seconds < res.budget, f"{res.seconds:.2f}s exceeds the {res.budget:g}s budget"
