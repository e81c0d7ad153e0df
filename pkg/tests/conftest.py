import pytest

from convexcrowd import FAMILIES, ModelHandle

SPAMMER_FAMILIES = [f for f in FAMILIES if f != "convex_pl"]
DIFFERENTIABLE = [
    ModelHandle("dawid_skene"),
    ModelHandle("additive_noise"),
    ModelHandle("additive_noise", noise_cdf="gaussian"),
    ModelHandle("minimax_restricted"),
    ModelHandle("glad_restricted"),
]


@pytest.fixture(params=FAMILIES)
def model(request):
    return ModelHandle(request.param)


@pytest.fixture(params=SPAMMER_FAMILIES)
def spammer_model(request):
    return ModelHandle(request.param)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
