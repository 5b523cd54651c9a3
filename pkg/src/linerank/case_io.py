"""Read and write network case files in the MATPOWER text format.

Only the fields a linear flow model needs are kept: bus ids and demands,
generator set points, branch endpoints, series reactance, tap ratio, and
thermal rating. Buses with at least one in-service generator are the
random-injection buses; all others carry fixed injections.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import CaseFormatError, NetworkError

_BASE_MVA_RE = re.compile(r"mpc\.baseMVA\s*=\s*([0-9eE.+-]+)\s*;")
_NAME_RE = re.compile(r"function\s+mpc\s*=\s*(\w+)")
_SECTION_RE = r"mpc\.%s\s*=\s*\[(.*?)\];"

# Minimum MATPOWER column counts for the fields we read.
_MIN_BUS_COLS = 3     # bus_i, type, Pd
_MIN_GEN_COLS = 2     # bus, Pg
_MIN_BRANCH_COLS = 4  # fbus, tbus, r, x
_GEN_STATUS_COL = 7
_BRANCH_STATUS_COL = 10


@dataclass(frozen=True)
class Bus:
    """One bus: identity, fixed demand in MW, and its random/fixed class."""

    id: int
    demand: float
    is_stochastic: bool

    @property
    def is_deterministic(self) -> bool:
        return not self.is_stochastic


@dataclass(frozen=True)
class Generator:
    """One generating unit: host bus and nominal set point in MW."""

    bus: int
    nominal_output: float


@dataclass(frozen=True)
class Branch:
    """One transmission line or transformer.

    ``index`` is the 1-based position in the case file and is the public
    line number in every ranking output. ``rating`` is the long-term MVA
    limit; 0 means unrated. ``tap_ratio`` 0 means a plain line.
    """

    index: int
    from_bus: int
    to_bus: int
    reactance: float
    tap_ratio: float
    rating: float


def susceptance(branch: Branch) -> float:
    """Series susceptance: 1/x for a line, 1/(tap * x) for a transformer."""
    if branch.reactance <= 0:
        raise NetworkError(
            f"branch {branch.index} has non-positive reactance {branch.reactance}"
        )
    if branch.tap_ratio < 0:
        raise NetworkError(
            f"branch {branch.index} has negative tap ratio {branch.tap_ratio}"
        )
    x_eff = branch.reactance if branch.tap_ratio == 0.0 else branch.tap_ratio * branch.reactance
    return 1.0 / x_eff


@dataclass(frozen=True)
class GridCase:
    """A parsed case: buses, generators, and branches in file order."""

    name: str
    base_mva: float
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    branches: tuple[Branch, ...]

    def __post_init__(self) -> None:
        _validate(self)

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    @property
    def stochastic_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses if b.is_stochastic)

    @property
    def deterministic_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses if b.is_deterministic)

    def bus(self, bus_id: int) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise NetworkError(f"no bus with id {bus_id}")

    def generation_at(self, bus_id: int) -> float:
        """Total nominal generator output at a bus, MW."""
        return sum(g.nominal_output for g in self.generators if g.bus == bus_id)

    def net_injection(self, bus_id: int) -> float:
        """Nominal net injection at a bus (generation minus demand), MW."""
        return self.generation_at(bus_id) - self.bus(bus_id).demand


def _validate(case: GridCase) -> None:
    if case.base_mva <= 0:
        raise CaseFormatError(f"baseMVA must be positive, got {case.base_mva}")
    if case.n_buses < 2:
        raise NetworkError(f"need at least 2 buses, got {case.n_buses}")
    if case.n_branches < 1:
        raise NetworkError("case has no in-service branches")

    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise CaseFormatError(f"duplicate bus ids: {dupes}")
    id_set = set(ids)

    for g in case.generators:
        if g.bus not in id_set:
            raise NetworkError(f"generator references unknown bus {g.bus}")

    for br in case.branches:
        if br.from_bus not in id_set or br.to_bus not in id_set:
            raise NetworkError(
                f"branch {br.index} references unknown bus "
                f"({br.from_bus}, {br.to_bus})"
            )
        if br.from_bus == br.to_bus:
            raise NetworkError(f"branch {br.index} is a self-loop at bus {br.from_bus}")
        if br.reactance <= 0.0:
            raise NetworkError(
                f"branch {br.index} has non-positive reactance {br.reactance}"
            )
        if br.rating < 0:
            raise CaseFormatError(f"branch {br.index} has negative rating {br.rating}")
        if br.tap_ratio < 0:
            raise CaseFormatError(f"branch {br.index} has negative tap ratio {br.tap_ratio}")

    gen_buses = {g.bus for g in case.generators}
    flags = {b.id: b.is_stochastic for b in case.buses}
    for bus_id, flag in flags.items():
        if flag != (bus_id in gen_buses):
            raise CaseFormatError(
                f"bus {bus_id} stochastic flag disagrees with generator list"
            )
    if not gen_buses:
        raise NetworkError("case has no generator buses, nothing is random")
    if len(gen_buses) == len(ids):
        raise NetworkError("case has no load-only buses")


def _section_rows(text: str, name: str, min_cols: int) -> list[list[float]]:
    match = re.search(_SECTION_RE % name, text, re.DOTALL)
    if match is None:
        raise CaseFormatError(f"missing mpc.{name} section")
    # Strip % comments per line first; a full-line comment need not end
    # in a semicolon, so it must never merge with the following row.
    stripped = "\n".join(
        line.split("%", 1)[0] for line in match.group(1).splitlines()
    )
    rows = []
    for lineno, raw in enumerate(stripped.split(";"), start=1):
        body = raw.strip()
        if not body:
            continue
        try:
            values = [float(tok) for tok in body.split()]
        except ValueError as exc:
            raise CaseFormatError(f"mpc.{name} row {lineno}: {exc}") from None
        if len(values) < min_cols:
            raise CaseFormatError(
                f"mpc.{name} row {lineno}: expected at least {min_cols} "
                f"columns, got {len(values)}"
            )
        rows.append(values)
    if not rows:
        raise CaseFormatError(f"mpc.{name} section is empty")
    return rows


def parse_case(text: str, name: str | None = None) -> GridCase:
    """Parse MATPOWER case text into a GridCase.

    Out-of-service generators and branches (status 0) are dropped.
    Multiple generators at one bus each appear in ``generators``;
    downstream models sum them per bus.
    """
    if name is None:
        m = _NAME_RE.search(text)
        name = m.group(1) if m else "case"

    m = _BASE_MVA_RE.search(text)
    if m is None:
        raise CaseFormatError("missing mpc.baseMVA")
    base_mva = float(m.group(1))

    bus_rows = _section_rows(text, "bus", _MIN_BUS_COLS)
    gen_rows = _section_rows(text, "gen", _MIN_GEN_COLS)
    branch_rows = _section_rows(text, "branch", _MIN_BRANCH_COLS)

    generators = tuple(
        Generator(bus=int(row[0]), nominal_output=row[1])
        for row in gen_rows
        if not (len(row) > _GEN_STATUS_COL and row[_GEN_STATUS_COL] <= 0)
    )
    gen_buses = {g.bus for g in generators}

    buses = tuple(
        Bus(id=int(row[0]), demand=row[2], is_stochastic=int(row[0]) in gen_buses)
        for row in bus_rows
    )

    branches = []
    for row in branch_rows:
        if len(row) > _BRANCH_STATUS_COL and row[_BRANCH_STATUS_COL] <= 0:
            continue
        branches.append(
            Branch(
                index=len(branches) + 1,
                from_bus=int(row[0]),
                to_bus=int(row[1]),
                reactance=row[3],
                tap_ratio=row[8] if len(row) > 8 else 0.0,
                rating=row[5] if len(row) > 5 else 0.0,
            )
        )

    return GridCase(
        name=name,
        base_mva=base_mva,
        buses=buses,
        generators=generators,
        branches=tuple(branches),
    )


def dump_case(case: GridCase) -> str:
    """Serialize a GridCase to canonical MATPOWER text.

    Parsing the output yields a case equal to the input. Fields this
    package does not model are written as zeros (or as the neutral
    MATPOWER defaults for status and angle limits).
    """
    out = [f"function mpc = {case.name}", "mpc.version = '2';", f"mpc.baseMVA = {case.base_mva!r};"]

    out.append("mpc.bus = [")
    for b in case.buses:
        # Type 2 marks generator buses, 1 the rest; cosmetic for this model.
        btype = 2 if b.is_stochastic else 1
        out.append(f"\t{b.id}\t{btype}\t{b.demand!r}\t0\t0\t0\t1\t1\t0\t0\t1\t1.1\t0.9;")
    out.append("];")

    out.append("mpc.gen = [")
    for g in case.generators:
        out.append(f"\t{g.bus}\t{g.nominal_output!r}\t0\t0\t0\t1\t{case.base_mva!r}\t1\t{g.nominal_output!r}\t0;")
    out.append("];")

    out.append("mpc.branch = [")
    for br in case.branches:
        out.append(
            f"\t{br.from_bus}\t{br.to_bus}\t0\t{br.reactance!r}\t0"
            f"\t{br.rating!r}\t{br.rating!r}\t{br.rating!r}"
            f"\t{br.tap_ratio!r}\t0\t1\t-360\t360;"
        )
    out.append("];")
    return "\n".join(out) + "\n"


def load_case(path: str | Path) -> GridCase:
    """Load a case from a MATPOWER .m file on disk."""
    p = Path(path)
    text = p.read_text()
    return parse_case(text, name=p.stem)


def load_case39() -> GridCase:
    """Load the bundled New England 39-bus test system."""
    text = resources.files("linerank.data").joinpath("case39.m").read_text()
    return parse_case(text, name="case39")
