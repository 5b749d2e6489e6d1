"""Binary trajectory export and diagnostics CSV.

Trajectory file layout (little endian):

    int64 nx | int64 ny | float64 lx | float64 ly | float64 dt | int64 n_steps

followed by n_steps+1 contiguous float64 frames, each nx*ny samples in
row-major (y, x) order.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ValidationError
from .forward import Trajectory
from .spectral import Field, Grid

__all__ = ["write_trajectory", "read_trajectory", "write_diagnostics_csv"]

_HEADER = struct.Struct("<qqdddq")


def write_trajectory(traj: Trajectory, path) -> None:
    g = traj.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.nx, g.ny, g.lx, g.ly, traj.dt, traj.n_steps))
        for state in traj.states:
            fh.write(state.values.astype("<f8").tobytes())


def read_trajectory(path) -> Trajectory:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValidationError(f"{path}: truncated trajectory header")
        nx, ny, lx, ly, dt, n_steps = _HEADER.unpack(header)
        grid = Grid(nx=nx, ny=ny, lx=lx, ly=ly)
        frames = []
        for _ in range(n_steps + 1):
            raw = fh.read(8 * grid.size)
            if len(raw) != 8 * grid.size:
                raise ValidationError(f"{path}: truncated trajectory frame")
            frames.append(Field(grid, np.frombuffer(raw, dtype="<f8").copy()))
    times = np.arange(n_steps + 1, dtype=np.float64) * dt
    return Trajectory(grid=grid, dt=dt, times=times, states=tuple(frames))


def write_diagnostics_csv(traj: Trajectory, path) -> None:
    """Emit the per-step diagnostics recorded by the forward solver."""
    if traj.diagnostics is None:
        raise ValidationError("trajectory carries no diagnostics")
    with open(path, "w", newline="") as fh:
        fh.write("step,time,energy,mass,min_phi,max_phi,clamp_events\n")
        for d in traj.diagnostics:
            fh.write(
                f"{d.step},{d.time!r},{d.energy!r},{d.mass!r},"
                f"{d.min_phi!r},{d.max_phi!r},{d.clamp_events}\n"
            )
