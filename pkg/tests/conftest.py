"""Independent high-precision oracles shared by the test modules.

Nothing here imports the package's numerics: Phi comes from mpmath and roots
are found by plain bisection at 40 digits.
"""

import mpmath as mp
import pytest

mp.mp.dps = 40


def mp_phi_cdf(z):
    return mp.ncdf(mp.mpf(z))


def mp_kstar(k, sigma):
    k, sigma = mp.mpf(k), mp.mpf(sigma)

    def g(t):
        return t / (2 * k) - mp.mpf(1) / 2 + mp.ncdf(-t / sigma)

    lo = sigma * mp.sqrt(2 * mp.log(2 * k / (sigma * mp.sqrt(2 * mp.pi))))
    hi = k
    for _ in range(200):
        mid = (lo + hi) / 2
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


@pytest.fixture
def kstar_oracle():
    return mp_kstar


# ---------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_ACCEPTANCE: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(cid, title): acceptance criterion id and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or (report.when != "call" and report.passed):
        return
    cid, title = marker.args
    entry = _ACCEPTANCE.setdefault(cid, {"title": title, "ok": True, "seconds": 0.0, "notes": []})
    if report.when == "call":
        entry["seconds"] += report.duration
    if report.failed:
        entry["ok"] = False
        entry["notes"].append(item.name)
    elif report.skipped:
        entry["ok"] = False
        entry["notes"].append(f"{item.name} skipped")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE, key=lambda c: (int(c.rstrip("ab")), c)):
        e = _ACCEPTANCE[cid]
        status = "PASS" if e["ok"] else "FAIL"
        extra = f"  [failed: {', '.join(e['notes'])}]" if e["notes"] else ""
        tr.write_line(f"criterion {cid:<3} {status}  {e['title']} ({e['seconds']:.2f} s){extra}")
