import pytest

from clinner.synth import SynthSpec, generate_corpus


@pytest.fixture(scope="session")
def clean_corpus():
    return generate_corpus(SynthSpec(n_docs=20, seed=11))


@pytest.fixture(scope="session")
def noisy_corpus():
    return generate_corpus(SynthSpec(n_docs=30, seed=12, noise_rate=0.3, dict_coverage=0.8))


@pytest.fixture
def criterion(request):
    """Context manager that records one PASS/FAIL line per acceptance criterion."""
    import contextlib
    import time

    log = request.config.__dict__.setdefault("_acceptance_lines", [])

    @contextlib.contextmanager
    def run(number, title):
        info = {}
        t0 = time.perf_counter()
        try:
            yield info
        except BaseException as exc:
            line = f"FAIL  criterion {number}: {title} ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
            log.append(line)
            print(line)
            raise
        detail = "; ".join(f"{k}={v}" for k, v in info.items())
        line = f"PASS  criterion {number}: {title} [{time.perf_counter() - t0:.1f}s] {detail}".rstrip()
        log.append(line)
        print(line)

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
