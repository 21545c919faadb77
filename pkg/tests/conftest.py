import hypothesis

hypothesis.settings.register_profile("suite", max_examples=60, deadline=None)
hypothesis.settings.load_profile("suite")

# verdict lines appended by the acceptance tests; echoed after the run
CRITERION_NOTES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERION_NOTES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_NOTES:
            terminalreporter.write_line(line)
