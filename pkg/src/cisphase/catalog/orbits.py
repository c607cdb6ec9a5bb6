"""Periodic-orbit catalog: ingest, validation, and phase-to-state mapping."""

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Union

import numpy as np

from ..dynamics.cr3bp import as_state, check_mass_ratio
from ..dynamics.propagation import DEFAULT_SETTINGS, PropagationSettings, propagate, propagate_sequence
from ..errors import CatalogParseError, ClosureError
from ..utils.text import format_float

logger = logging.getLogger(__name__)

CATALOG_HEADER = ["id", "family", "mu", "x", "y", "z", "vx", "vy", "vz", "period"]

# Per-component tolerance for the one-period closure check run at load time.
CLOSURE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class OrbitSpec:
    """A catalog entry: one periodic orbit with its initial condition and period."""

    id: str
    family: str
    mu: float
    initial_state: np.ndarray
    period: float

    def __post_init__(self):
        object.__setattr__(self, "mu", check_mass_ratio(self.mu))
        object.__setattr__(self, "initial_state", as_state(self.initial_state))
        if not np.isfinite(self.period) or self.period <= 0:
            raise ValueError(f"orbit '{self.id}': period must be positive, got {self.period}")
        self.initial_state.setflags(write=False)

    def closure_residual(self, settings: PropagationSettings = DEFAULT_SETTINGS) -> float:
        """Largest component difference after one full period."""
        final = propagate(self.initial_state, 0.0, self.period, self.mu, settings)
        return float(np.max(np.abs(final - self.initial_state)))


@dataclass(frozen=True)
class TimeGrid:
    """L uniformly spaced observation epochs t_0..t_{L-1} plus the terminal t_L."""

    t_start: float
    t_end: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("a time grid needs at least one step")
        if not self.t_end > self.t_start:
            raise ValueError("t_end must be after t_start")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.steps

    @property
    def epochs(self) -> np.ndarray:
        """All L + 1 epochs, terminal included."""
        return self.t_start + self.dt * np.arange(self.steps + 1)

    @property
    def observation_epochs(self) -> np.ndarray:
        return self.epochs[:-1]


def wrap_phase(phase: float) -> float:
    """Map a phase onto [0, 1)."""
    wrapped = float(phase) % 1.0
    # -tiny % 1.0 can round to exactly 1.0
    return 0.0 if wrapped >= 1.0 else wrapped


def phase_to_state(orbit: OrbitSpec, phase: float, epoch_offset: float = 0.0,
                   settings: PropagationSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """State reached from the catalog initial condition after phase*period + epoch_offset."""
    elapsed = wrap_phase(phase) * orbit.period + epoch_offset
    return propagate(orbit.initial_state, 0.0, elapsed, orbit.mu, settings)


def sample_trajectory(orbit: OrbitSpec, phase: float, grid: TimeGrid,
                      settings: PropagationSettings = DEFAULT_SETTINGS,
                      epoch_offset: float = 0.0,
                      include_terminal: bool = False) -> np.ndarray:
    """States at the grid's observation epochs (and t_L when include_terminal).

    Propagation is sequential between adjacent epochs.
    """
    epochs = grid.epochs if include_terminal else grid.observation_epochs
    start = phase_to_state(orbit, phase, epoch_offset + epochs[0], settings)
    states, _ = propagate_sequence(start, epochs, orbit.mu, settings)
    return states


def _open_text(source) -> TextIO:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("ascii"))
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="ascii", newline="")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="ascii", newline="")


def _parse_row(row: List[str], line_no: int) -> OrbitSpec:
    if len(row) != len(CATALOG_HEADER):
        raise CatalogParseError(line_no, f"expected {len(CATALOG_HEADER)} fields, got {len(row)}")
    orbit_id, family = row[0].strip(), row[1].strip()
    if not orbit_id:
        raise CatalogParseError(line_no, "empty orbit id")
    try:
        values = [float(v) for v in row[2:]]
    except ValueError as e:
        raise CatalogParseError(line_no, f"bad number: {e}") from e
    try:
        return OrbitSpec(orbit_id, family, values[0], np.array(values[1:7]), values[7])
    except ValueError as e:
        raise CatalogParseError(line_no, str(e)) from e


def load_catalog(source, validate: bool = True, closure_tol: float = CLOSURE_TOL,
                 settings: PropagationSettings = DEFAULT_SETTINGS) -> List[OrbitSpec]:
    """Parse a catalog CSV (bytes, binary/text stream or path) into validated orbits.

    '#'-prefixed lines and blank lines are skipped. The first remaining line
    must be the exact header.
    """
    stream = _open_text(source)
    orbits: List[OrbitSpec] = []
    seen = set()
    header_seen = False
    try:
        for line_no, row in enumerate(csv.reader(stream), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if not header_seen:
                if [c.strip() for c in row] != CATALOG_HEADER:
                    raise CatalogParseError(line_no, f"header must be '{','.join(CATALOG_HEADER)}'")
                header_seen = True
                continue
            orbit = _parse_row(row, line_no)
            if orbit.id in seen:
                raise CatalogParseError(line_no, f"duplicate orbit id '{orbit.id}'")
            seen.add(orbit.id)
            orbits.append(orbit)
    finally:
        if isinstance(source, (str, Path)):
            stream.close()
        elif isinstance(stream, io.TextIOWrapper) and stream is not source:
            # hand the binary stream back open
            stream.detach()
    if not header_seen:
        raise CatalogParseError(1, "missing header")

    if validate:
        for orbit in orbits:
            residual = orbit.closure_residual(settings)
            if residual > closure_tol:
                raise ClosureError(orbit.id, residual, closure_tol)
            logger.debug("orbit %s closes to %.2e", orbit.id, residual)
    logger.info("loaded %d catalog orbits", len(orbits))
    return orbits


def write_catalog(orbits: Iterable[OrbitSpec], sink: Union[TextIO, str, Path]) -> None:
    """Write orbits in the catalog CSV format (inverse of load_catalog)."""
    own = isinstance(sink, (str, Path))
    stream = open(sink, "w", encoding="ascii", newline="") if own else sink
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CATALOG_HEADER)
        for orbit in orbits:
            writer.writerow(
                [orbit.id, orbit.family, format_float(orbit.mu)]
                + [format_float(v) for v in orbit.initial_state]
                + [format_float(orbit.period)]
            )
    finally:
        if own:
            stream.close()


def index_catalog(orbits: Sequence[OrbitSpec]) -> Dict[str, OrbitSpec]:
    return {orbit.id: orbit for orbit in orbits}
