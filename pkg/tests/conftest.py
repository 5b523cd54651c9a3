"""Shared fixtures: the bundled 39-bus case and small hand-built networks."""

from __future__ import annotations

import contextlib

import numpy as np
import pytest

from linerank import build_dc_model, load_case39, parse_case

ACCEPTANCE_REPORT: list[str] = []


class CriterionCheck:
    """Mutable verdict for one acceptance criterion."""

    def __init__(self, name: str) -> None:
        self.name = name
        self.ok = False
        self.detail = ""


@pytest.fixture()
def criterion():
    """Context manager that records one acceptance criterion.

    Exactly one ``[PASS]``/``[FAIL]`` line is emitted per use, even when
    the body raises, and all lines are replayed in the terminal summary
    so they stay visible under output capture.
    """

    @contextlib.contextmanager
    def _criterion(name: str):
        check = CriterionCheck(name)
        try:
            yield check
        except BaseException as exc:
            ACCEPTANCE_REPORT.append(f"[FAIL] {name}: {type(exc).__name__}: {exc}")
            raise
        line = f"[{'PASS' if check.ok else 'FAIL'}] {name}: {check.detail}"
        ACCEPTANCE_REPORT.append(line)
        print(line)
        assert check.ok, line

    return _criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)


def case_text(
    buses: list[tuple[int, float]],
    gens: list[tuple[int, float]],
    branches: list[tuple],
    base: float = 100.0,
    name: str = "tiny",
) -> str:
    """Render a minimal MATPOWER case body.

    ``buses`` holds (id, demand MW); ``gens`` holds (bus, output MW);
    ``branches`` holds (from, to, x) optionally extended with
    (rating MW, tap ratio).
    """
    lines = [f"function mpc = {name}", "mpc.version = '2';", f"mpc.baseMVA = {base};"]
    gen_buses = {g[0] for g in gens}
    lines.append("mpc.bus = [")
    for bus_id, demand in buses:
        btype = 2 if bus_id in gen_buses else 1
        lines.append(f"{bus_id} {btype} {demand} 0 0 0 1 1 0 0 1 1.1 0.9;")
    lines.append("];")
    lines.append("mpc.gen = [")
    for bus_id, output in gens:
        lines.append(f"{bus_id} {output} 0 0 0 1 {base} 1 {output} 0;")
    lines.append("];")
    lines.append("mpc.branch = [")
    for br in branches:
        f, t, x = br[0], br[1], br[2]
        rating = br[3] if len(br) > 3 else 0.0
        tap = br[4] if len(br) > 4 else 0.0
        lines.append(f"{f} {t} 0 {x} 0 {rating} {rating} {rating} {tap} 0 1 -360 360;")
    lines.append("];")
    return "\n".join(lines) + "\n"


def make_case(buses, gens, branches, base=100.0, name="tiny"):
    return parse_case(case_text(buses, gens, branches, base, name), name=name)


@pytest.fixture(scope="session")
def case39():
    return load_case39()


@pytest.fixture(scope="session")
def model39(case39):
    return build_dc_model(case39)


@pytest.fixture(scope="session")
def two_bus_model():
    """One branch of reactance 0.5 (susceptance 2) between a generator
    bus and a load bus."""
    case = make_case(
        buses=[(1, 0.0), (2, 100.0)],
        gens=[(1, 100.0)],
        branches=[(1, 2, 0.5)],
    )
    return build_dc_model(case)


@pytest.fixture(scope="session")
def triangle_model():
    """Unit-susceptance triangle: edges 1-2, 2-3, 1-3 in that order."""
    case = make_case(
        buses=[(1, 0.0), (2, 50.0), (3, 50.0)],
        gens=[(1, 100.0)],
        branches=[(1, 2, 1.0), (2, 3, 1.0), (1, 3, 1.0)],
    )
    return build_dc_model(case)


@pytest.fixture(scope="session")
def one_line_model():
    """One stochastic node feeding one load over a single rated line.

    Nominal injection nets to zero, so flows are centered; the rating
    makes gamma/sigma = 1.28155 when injections have variance 4 pu^2
    (two-sided normal tail almost exactly 0.2).
    """
    case = make_case(
        buses=[(1, 500.0), (2, 0.0)],
        gens=[(1, 500.0)],
        branches=[(1, 2, 0.5, 128.155)],
    )
    return build_dc_model(case)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
