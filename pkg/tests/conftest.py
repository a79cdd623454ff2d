import numpy as np
import pytest

from soc_cate.core import CLIMATE_VARIABLES

LPIS_HEADER = "field_id,year,crop_code,eco,geometry_ref"
CLIMATE_HEADER = "field_id,year," + ",".join(CLIMATE_VARIABLES)
SOC_HEADER = "field_id,soc_pct"

# A physically valid climate row body (9 values).
CLIMATE_VALUES = (280.0, 281.0, 0.3, 1.0, 0.5, 0.001, 2.0, 0.0005, 0.002)


def climate_row(field_id, year, values=CLIMATE_VALUES):
    return ",".join([field_id, str(year)] + [repr(float(v)) for v in values])


@pytest.fixture
def write_csv(tmp_path):
    """Write ``header`` + ``rows`` to a file under tmp_path and return its path."""

    def _write(name, header, rows, newline="\n"):
        path = tmp_path / name
        path.write_bytes((newline.join([header, *rows]) + newline).encode("utf-8"))
        return path

    return _write


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    # Acceptance lines are captured per test; repeat them once at the end.
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
