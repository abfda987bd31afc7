import io
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from netphase.capture import write_capture

DATA = Path(__file__).parent / "data"

settings.register_profile("repo", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def pcap_bytes(records, **kw) -> bytes:
    buf = io.BytesIO()
    write_capture(buf, records, **kw)
    return buf.getvalue()


@pytest.fixture
def fixture_pcap() -> Path:
    return DATA / "three_packets.pcap"


# criterion number -> list of (part, passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{name}: {'ok' if p else 'FAILED'} ({d})" for name, p, d in parts)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
