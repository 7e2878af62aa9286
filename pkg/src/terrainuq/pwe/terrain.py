"""Piecewise-linear terrain profiles, CSV I/O and synthetic generators."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True, eq=False)
class TerrainProfile:
    """Range -> elevation function defined by ordered sample points.

    Elevation between points is linearly interpolated; beyond the last point
    it stays constant.
    """

    points: np.ndarray
    name: str = "terrain"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ConfigurationError("terrain points must be an (n, 2) array of (range_m, elevation_m)")
        if len(pts) < 2:
            raise ConfigurationError("terrain needs at least 2 points")
        if pts[0, 0] != 0.0:
            raise ConfigurationError(f"first terrain range must be 0, got {pts[0, 0]}")
        if np.any(np.diff(pts[:, 0]) <= 0):
            raise ConfigurationError("terrain ranges must be strictly increasing")
        if not np.all(np.isfinite(pts)):
            raise ConfigurationError("terrain contains non-finite values")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def ranges(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def elevations(self) -> np.ndarray:
        return self.points[:, 1]

    def __call__(self, x):
        return np.interp(x, self.ranges, self.elevations)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("range_m,elevation_m\n")
        for r, e in self.points:
            buf.write(f"{r:.9g},{e:.9g}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8", newline="")
        return text

    @classmethod
    def from_csv(cls, path, name=None) -> TerrainProfile:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"{path}: cannot read terrain file ({exc})") from exc
        reader = csv.reader(io.StringIO(text))
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
        if not rows or [c.strip() for c in rows[0]] != ["range_m", "elevation_m"]:
            raise ConfigurationError(f"{path}: expected header 'range_m,elevation_m'")
        pts = []
        for lineno, row in enumerate(rows[1:], start=2):
            try:
                pts.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError) as exc:
                raise ConfigurationError(f"{path}:{lineno}: malformed terrain row {row!r}") from exc
        try:
            return cls(np.array(pts), name or path.stem)
        except ConfigurationError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc


def flat(length_m=5000.0, elevation_m=0.0) -> TerrainProfile:
    return TerrainProfile(np.array([[0.0, elevation_m], [length_m, elevation_m]]), "flat")


def wedge(length_m=2000.0, start_m=500.0, peak_m=1200.0, end_m=1600.0, height_m=30.0,
          base_m=0.0) -> TerrainProfile:
    """Single triangular hill rising from ``start_m`` to a crest at ``peak_m``."""
    if not 0.0 < start_m < peak_m < end_m <= length_m:
        raise ConfigurationError("wedge needs 0 < start < peak < end <= length")
    pts = [[0.0, base_m], [start_m, base_m], [peak_m, base_m + height_m], [end_m, base_m]]
    if end_m < length_m:
        pts.append([length_m, base_m])
    return TerrainProfile(np.array(pts), "wedge")


def double_hill(length_m=5000.0, heights_m=(25.0, 40.0), centers_m=(1500.0, 3500.0),
                half_widths_m=(400.0, 600.0), n_points=201) -> TerrainProfile:
    x = np.linspace(0.0, length_m, n_points)
    z = np.zeros_like(x)
    for h, c, w in zip(heights_m, centers_m, half_widths_m):
        z += h * np.clip(np.cos(0.5 * np.pi * (x - c) / w), 0.0, None) ** 2 * (np.abs(x - c) < w)
    return TerrainProfile(np.column_stack([x, z]), "double_hill")


def thin_screen(length_m=4000.0, screen_m=1000.0, height_m=150.0, width_m=1.0) -> TerrainProfile:
    """Flat ground with a vertical screen of ``height_m`` at ``screen_m``.

    The screen is a narrow rectangle, so on a staircase grid coarser than
    ``width_m`` it occupies exactly one range sample.
    """
    eps = 1e-6
    pts = [[0.0, 0.0], [screen_m - eps, 0.0], [screen_m, height_m],
           [screen_m + width_m, height_m], [screen_m + width_m + eps, 0.0], [length_m, 0.0]]
    return TerrainProfile(np.array(pts), "thin_screen")


def random_smooth(length_m=5000.0, rms_m=10.0, correlation_m=500.0, seed=0, n_points=257,
                  min_elevation_m=0.0) -> TerrainProfile:
    """Random profile from spectral synthesis with a Gaussian spectrum."""
    rng = np.random.Generator(np.random.Philox(seed))
    x = np.linspace(0.0, length_m, n_points)
    k = 2.0 * np.pi * np.fft.rfftfreq(n_points, d=x[1] - x[0])
    amp = np.exp(-0.25 * (k * correlation_m) ** 2)
    spec = amp * (rng.standard_normal(k.size) + 1j * rng.standard_normal(k.size))
    spec[0] = 0.0
    z = np.fft.irfft(spec, n=n_points)
    if np.std(z) > 0:
        z *= rms_m / np.std(z)
    z += min_elevation_m - z.min()
    return TerrainProfile(np.column_stack([x, z]), f"random_smooth_{seed}")


GENERATORS = {
    "flat": flat,
    "wedge": wedge,
    "double_hill": double_hill,
    "thin_screen": thin_screen,
    "random_smooth": random_smooth,
}
