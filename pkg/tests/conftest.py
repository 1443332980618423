from geoanneal import circuits as cm
from geoanneal.pipeline import cshunt_system

# one line per acceptance criterion, printed in the terminal summary
CRITERIA = {}


def record(number, title, passed, detail):
    CRITERIA[number] = (title, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        title, ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")


def small_cshunt(points=40, L=200, **kw):
    sched = cm.Schedule(cm.uniform_grid(points), (2.9, 2.2), **kw)
    return cshunt_system(L=L, sched=sched)
