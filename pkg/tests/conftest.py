import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in mod.RESULTS.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
