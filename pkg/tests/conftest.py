def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance criterion lines into the terminal summary so a
    plain `pytest -v` run shows one PASS/FAIL line per criterion."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
