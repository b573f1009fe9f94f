import json
import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from cpt_law.law import LawParams  # noqa: E402
from cpt_law.synth import demo_schedules  # noqa: E402


@pytest.fixture
def truth() -> LawParams:
    return LawParams()


@pytest.fixture
def short_schedules():
    return demo_schedules(pt_steps=1000, cpt_steps=500)


@pytest.fixture
def write_json(tmp_path):
    def _write(name: str, payload) -> str:
        path = tmp_path / name
        if hasattr(payload, "model_dump_json"):
            path.write_text(payload.model_dump_json(by_alias=True))
        else:
            path.write_text(json.dumps(payload))
        return str(path)

    return _write
