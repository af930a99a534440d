import pytest
from hypothesis import settings

from cnntreelstm.toy import TOY_TREEBANK

# first calls may include numba compilation; timing is not what these tests check
settings.register_profile("repo", deadline=None, derandomize=True)
settings.load_profile("repo")


@pytest.fixture
def toy_dir(tmp_path):
    """Toy treebank written as train/dev/test files."""
    (tmp_path / "train.txt").write_text("\n".join(TOY_TREEBANK) + "\n")
    (tmp_path / "dev.txt").write_text("\n".join(TOY_TREEBANK[:5]) + "\n")
    (tmp_path / "test.txt").write_text("\n".join(TOY_TREEBANK[5:]) + "\n")
    return tmp_path


# acceptance criteria report one PASS/FAIL line each in the terminal summary
ACCEPTANCE: dict = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of an acceptance criterion under its number."""
    key = request.node.get_closest_marker("criterion").args[0]
    ACCEPTANCE[key] = ("FAIL", "")

    def report(detail=""):
        ACCEPTANCE[key] = ("PASS", detail)

    yield report


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            ACCEPTANCE.setdefault(mark.args[0], ("SKIP", ""))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {status}" + (f"  {detail}" if detail else ""))
