import os

import pytest


def pytest_collection_modifyitems(config, items):
    if os.environ.get("PUSHRL_NIGHTLY") == "1":
        return
    skip = pytest.mark.skip(reason="nightly-only; set PUSHRL_NIGHTLY=1 to run")
    for item in items:
        if "nightly" in item.keywords:
            item.add_marker(skip)
