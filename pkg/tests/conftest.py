import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# one "CRITERION n ... PASS/FAIL" line per acceptance criterion, echoed in the summary
CRITERIA = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
