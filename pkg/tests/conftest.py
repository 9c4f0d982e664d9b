import pytest

HEADER = "prescriber_id,patient_id,drug_name,schedule,specialty,latitude,longitude,dispense_date\n"

# p1 -> {A,B}, p2 -> {A,B,C}, p3 -> {B,C}; C has no coordinates
TINY_ROWS = [
    "A,p1,Oxycodone hcl,II,General Practitioner,38.03,-84.50,2011-09-01",
    "B,p1,Oxycodone hcl,II,Dentist,37.08,-88.60,2011-09-03",
    "A,p2,Oxycodone hcl,II,General Practitioner,38.03,-84.50,2011-09-05",
    "A,p2,Oxycodone hcl,II,General Practitioner,38.03,-84.50,2011-09-06",
    "B,p2,Morphine sulfate,II,Dentist,37.08,-88.60,2011-09-07",
    "C,p2,Morphine sulfate,II,Psychiatrist,,,2011-09-08",
    "B,p3,Morphine sulfate,II,Dentist,37.08,-88.60,2011-09-09",
    "C,p3,Morphine sulfate,II,Psychiatrist,,,2011-09-10",
    "D,p4,Diazepam,IV,Internist,38.2,-85.7,2011-09-11",
]


@pytest.fixture
def tiny_csv(tmp_path):
    path = tmp_path / "claims.csv"
    path.write_text(HEADER + "\n".join(TINY_ROWS) + "\n")
    return path


_CRITERIA: dict[str, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion covered by the test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call" and not (call.when == "setup" and call.excinfo):
        return
    label = marker.args[0]
    ok = call.excinfo is None
    _CRITERIA.setdefault(label, []).append(ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_CRITERIA, key=lambda s: int(s.split()[0].lstrip("AC"))):
        status = "PASS" if all(_CRITERIA[label]) else "FAIL"
        terminalreporter.write_line(f"[{status}] {label}")
