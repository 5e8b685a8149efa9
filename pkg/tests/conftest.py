import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo one ACCEPTANCE line per criterion after the test summary."""
    results = None
    for name, module in list(sys.modules.items()):
        if name.rsplit(".", 1)[-1] == "test_acceptance":
            results = getattr(module, "RESULTS", None)
            break
    if not results:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria", sep="-")
    for k in sorted(results):
        terminalreporter.write_line(f"ACCEPTANCE {k}: {results[k]}")
