"""Time-stamped simulation output and its CSV form."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def state_columns(gen_buses) -> list[str]:
    """Per-generator column names in file order: delta, omega, eqp, edp."""
    cols = []
    for bus in gen_buses:
        cols += [f"g{bus}.delta", f"g{bus}.omega", f"g{bus}.eqp", f"g{bus}.edp"]
    return cols


@dataclass
class Trajectory:
    """States sampled on a uniform output grid for one simulation run.

    ``states`` is (T, 4K) in block layout [delta | omega | eqp | edp];
    ``voltages`` holds |V| of the monitored buses, (T, n_mon).  A diverged
    run keeps NaN rows from the divergence time onward.
    """

    times: np.ndarray
    states: np.ndarray
    gen_buses: tuple[int, ...]
    solver: str
    monitor_buses: tuple[int, ...] = ()
    voltages: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    diverged: bool = False
    t_diverged: float | None = None

    @property
    def n_gen(self) -> int:
        return len(self.gen_buses)

    @property
    def columns(self) -> list[str]:
        return state_columns(self.gen_buses) + [f"v{b}" for b in self.monitor_buses]

    def value(self, column: str) -> np.ndarray:
        """Series of one named variable."""
        k = self.n_gen
        if column.startswith("v"):
            try:
                bus = int(column[1:])
            except ValueError:
                bus = None
            if bus is not None:
                if bus not in self.monitor_buses:
                    raise KeyError(f"bus {bus} was not monitored")
                return self.voltages[:, self.monitor_buses.index(bus)]
        name, _, fldname = column.partition(".")
        block = {"delta": 0, "omega": 1, "eqp": 2, "edp": 3}.get(fldname)
        if not name.startswith("g") or block is None:
            raise KeyError(f"unknown column {column!r}")
        bus = int(name[1:])
        if bus not in self.gen_buses:
            raise KeyError(f"no generator at bus {bus}")
        g = self.gen_buses.index(bus)
        return self.states[:, block * k + g]

    def to_csv(self) -> str:
        """Fixed 17-significant-digit CSV, one row per output step."""
        k = self.n_gen
        header = "t," + ",".join(self.columns)
        # interleave the block layout per generator for the file
        order = []
        for g in range(k):
            order += [g, k + g, 2 * k + g, 3 * k + g]
        data = self.states[:, order]
        lines = [header]
        has_v = len(self.monitor_buses) > 0
        for i in range(self.times.shape[0]):
            row = [f"{self.times[i]:.17g}"]
            row += [f"{x:.17g}" for x in data[i]]
            if has_v:
                row += [f"{x:.17g}" for x in self.voltages[i]]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"
