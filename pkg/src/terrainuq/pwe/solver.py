"""Two-way split-step Fourier parabolic-equation solver in (range, height).

The reduced field ``u`` multiplies a ``exp(+j*k0*x)`` carrier, so a free-space
step over ``dx`` multiplies the transverse spectrum by
``exp(-j*ky**2*dx/(2*k0))`` and, with ``exp(-j*omega*t)`` time dependence, a
beam tilted upward by ``theta`` carries the phase ``exp(+j*k0*y*sin(theta))``.

Fields live on an absolute height grid ``y_k = k*dy``, ``k = 0..N-1`` with ``N``
a power of two.  The ground is a staircase: at range station ``n`` its surface
sits on grid line ``G[n] = ceil(terrain(x_n)/dy)``.  The section between
stations ``n`` and ``n+1`` is marched over ``min(G[n], G[n+1])``; where ``G`` rises a
vertical facet removes the blocked part of the incident field and reflects it
into a sweep travelling the other way.  Backward sweeps carry the complex
conjugate of the physical field, which turns the conjugated multiplier of
:func:`step_backward` into diffraction of a wave moving toward the source.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.signal import lfilter

from ..errors import ConfigurationError, NumericalFailure, SimulationError
from .config import AntennaConfig, GroundModel, PweConfig
from .terrain import TerrainProfile

__all__ = [
    "ComplexField",
    "PathLossTrace",
    "aperture_width",
    "gaussian_source",
    "spectral_multiplier",
    "step_forward",
    "step_backward",
    "ground_index",
    "apply_ground_boundary",
    "ground_step",
    "absorber_taper",
    "free_space_axis_amplitude",
    "free_space_path_loss_db",
    "run_two_way",
    "march_field",
]


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Reduced field sampled on the (height, range) grid."""

    values: np.ndarray
    grid: PweConfig

    @property
    def heights(self):
        return self.grid.heights

    @property
    def ranges(self):
        return self.grid.ranges[: self.values.shape[1]]


@dataclass(frozen=True, eq=False)
class PathLossTrace:
    ranges_m: np.ndarray
    path_loss_db: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.ranges_m, dtype=float)
        pl = np.asarray(self.path_loss_db, dtype=float)
        if r.shape != pl.shape or r.ndim != 1:
            raise ValueError("ranges_m and path_loss_db must be 1-D arrays of equal length")
        if np.any(np.diff(r) <= 0):
            raise ValueError("ranges_m must be strictly increasing")
        object.__setattr__(self, "ranges_m", r)
        object.__setattr__(self, "path_loss_db", pl)

    def __len__(self):
        return len(self.ranges_m)

    def to_csv(self, path=None) -> str:
        lines = ["range_m,path_loss_db"]
        lines += [f"{r:.9g},{p:.9g}" for r, p in zip(self.ranges_m, self.path_loss_db)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> PathLossTrace:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


# ---------------------------------------------------------------------------
# source

def aperture_width(beamwidth_deg: float, k0: float) -> float:
    """1/e amplitude half-width of a Gaussian aperture with the given half-power beamwidth."""
    return math.sqrt(2.0 * math.log(2.0)) / (k0 * math.sin(math.radians(beamwidth_deg) / 2.0))


def gaussian_source(antenna: AntennaConfig, terrain: TerrainProfile, cfg: PweConfig) -> np.ndarray:
    """Unit-amplitude tilted Gaussian aperture at range 0.

    The width is chosen so that the far-field power pattern of the aperture has
    a half-power full width of ``antenna.beamwidth_deg``.
    """
    k0 = 2.0 * math.pi * antenna.frequency_hz / 299_792_458.0
    y = cfg.heights
    yc = float(terrain(0.0)) + antenna.tx_height_m
    if not 0.0 <= yc < cfg.domain_height_m:
        raise ConfigurationError(
            f"source centre {yc:.3f} m lies outside the height grid [0, {cfg.domain_height_m:.3f}) m")
    w = aperture_width(antenna.beamwidth_deg, k0)
    dy = y - yc
    u = np.exp(-(dy / w) ** 2).astype(complex)
    if antenna.elevation_deg != 0.0:
        u *= np.exp(1j * k0 * dy * math.sin(math.radians(antenna.elevation_deg)))
    return u


# ---------------------------------------------------------------------------
# free-space marching

def spectral_multiplier(n, delta_height_m, delta_range_m, k0, direction=1):
    ky = 2.0 * np.pi * sfft.fftfreq(n, d=delta_height_m)
    return np.exp(-1j * direction * ky ** 2 * delta_range_m / (2.0 * k0))


def _as_column(u_col):
    u = np.asarray(u_col)
    if u.ndim != 1:
        raise ValueError(f"expected a 1-D column, got shape {u.shape}")
    return u.astype(complex, copy=False)


def _step(u_col, cfg, delta_range_m, direction):
    u = _as_column(u_col)
    dz = cfg.delta_range_m if delta_range_m is None else delta_range_m
    if dz == 0:
        return u.copy()
    mult = spectral_multiplier(u.size, cfg.delta_height_m, dz, cfg.k0, direction)
    return sfft.ifft(mult * sfft.fft(u, norm="ortho"), norm="ortho")


def step_forward(u_col, cfg: PweConfig, delta_range_m=None) -> np.ndarray:
    """One free-space range step of the periodic column (unitary FFT convention).

    ``delta_range_m`` defaults to ``cfg.delta_range_m``.  The column length is
    free; the solver passes odd-extended columns of length ``2*N``.
    """
    return _step(u_col, cfg, delta_range_m, +1)


def step_backward(u_col, cfg: PweConfig, delta_range_m=None) -> np.ndarray:
    """Free-space step with the conjugated multiplier; the exact inverse of :func:`step_forward`."""
    return _step(u_col, cfg, delta_range_m, -1)


# ---------------------------------------------------------------------------
# ground

def ground_index(height_m, cfg: PweConfig) -> int:
    """Grid line of the staircase surface: terrain height rounded up to the grid."""
    g = int(math.ceil(float(height_m) / cfg.delta_height_m - 1e-9))
    return max(g, 0)


def _check_ground(g, cfg):
    if g >= cfg.n_height - 1:
        raise SimulationError(
            f"terrain surface at {g * cfg.delta_height_m:.2f} m reaches the domain top "
            f"({cfg.domain_height_m:.2f} m)")


def apply_ground_boundary(u_col, local_terrain_height_m, ground: GroundModel, cfg: PweConfig) -> np.ndarray:
    """Zero the field inside the ground.

    For PEC the surface grid line itself is zeroed (Dirichlet).  For an
    impedance ground the surface value is kept; the impedance condition is
    imposed by the mixed transform inside :func:`ground_step`.
    """
    u = _as_column(u_col).copy()
    g = ground_index(local_terrain_height_m, cfg)
    _check_ground(g, cfg)
    stop = g + 1 if ground.is_pec else g
    u[:stop] = 0.0
    return u


def _odd_extend(v, n):
    """Odd-symmetric periodic extension (length 2n) of a column vanishing at index 0 and n."""
    ext = np.zeros(2 * n, dtype=complex)
    m = min(v.size, n)
    ext[1:m] = v[1:m]
    ext[2 * n - m + 1:] = -v[1:m][::-1]
    return ext


class _ImpedanceSurface:
    """Discrete mixed Fourier transform pieces for ``du/dy + alpha*u = 0``.

    ``alpha = j*k0*sqrt(n**2 - 1)`` is the grazing-incidence Leontovich value for
    horizontal polarisation.  ``r`` is the decaying root of
    ``r**2 + 2*alpha*dy*r - 1 = 0``; ``r**j`` spans the kernel of the discrete
    operator ``D u = (u[j+1] - u[j-1])/(2 dy) + alpha*u[j]``.
    """

    def __init__(self, ground, k0, dy, dz, n, direction):
        alpha = 1j * k0 * np.sqrt(ground.relative_permittivity - 1.0)
        if direction < 0:
            # the backward sweep carries the conjugate field
            alpha = np.conj(alpha)
        ah = alpha * dy
        disc = np.sqrt(1.0 + ah * ah)
        roots = (-ah + disc, -ah - disc)
        r = roots[0] if abs(roots[0]) < abs(roots[1]) else roots[1]
        self.alpha = alpha
        self.dy = dy
        self.r = complex(r)
        with np.errstate(under="ignore"):
            self.rpow = self.r ** np.arange(n)
            self.norm = (1.0 - self.r ** 2) / (1.0 - self.r ** (2 * n))
        lam = (np.log(self.r) / dy) ** 2
        self.mu = complex(np.exp(1j * direction * lam * dz / (2.0 * k0)))

    def split(self, v):
        h = self.dy
        vp = np.append(v, 0.0)
        w = np.zeros_like(v)
        w[1:] = (vp[2:] - vp[:-2]) / (2.0 * h) + self.alpha * v[1:]
        amp = self.norm * np.dot(self.rpow, v)
        return w, amp

    def merge(self, w, amp):
        h = self.dy
        r = self.r
        n = w.size
        # g_1 = 0, g_{j+1} = r g_j + 2h w_j  (j = 1..n-1)
        g = np.zeros(n + 1, dtype=complex)
        g[2:] = lfilter([1.0], [1.0, -r], 2.0 * h * w[1:])
        # y_n = 0, y_{j-1} = r (g_j - y_j)  (j = n..1), run on reversed indices
        y = lfilter([r], [1.0, r], g[n:0:-1])[::-1]
        y = y - (self.norm * np.dot(self.rpow, y)) * self.rpow
        return y + amp * self.rpow


class _Marcher:
    """Precomputed multipliers for ground-bounded steps in one direction."""

    def __init__(self, cfg, direction):
        n = cfg.n_height
        self.cfg = cfg
        self.n = n
        self.direction = direction
        self.mult = spectral_multiplier(2 * n, cfg.delta_height_m, cfg.delta_range_m, cfg.k0, direction)
        self.pec = cfg.ground.is_pec
        self.surface = None if self.pec else _ImpedanceSurface(
            cfg.ground, cfg.k0, cfg.delta_height_m, cfg.delta_range_m, n, direction)


    def _spectral(self, ext):
        return sfft.ifft(self.mult * sfft.fft(ext, norm="ortho"), norm="ortho")

    def step(self, u, g):
        n = self.n
        v = np.zeros(n, dtype=complex)
        v[: n - g] = u[g:]
        if self.pec:
            v[0] = 0.0
            v = self._spectral(_odd_extend(v, n))[:n]
            v[0] = 0.0
        else:
            surf = self.surface
            w, amp = surf.split(v)
            w = self._spectral(_odd_extend(w, n))[:n]
            w[0] = 0.0
            v = surf.merge(w, amp * surf.mu)
        out = np.zeros(n, dtype=complex)
        out[g:] = v[: n - g]
        return out


def ground_step(u_col, local_terrain_height_m, cfg: PweConfig, direction=1) -> np.ndarray:
    """March one range step above a flat ground segment at the given height.

    The field above the surface is odd-extended about it (PEC) or passed
    through the mixed transform (impedance ground), stepped with
    :func:`step_forward` (``direction=1``) or :func:`step_backward`
    (``direction=-1``) physics, restricted back and re-masked.
    """
    g = ground_index(local_terrain_height_m, cfg)
    _check_ground(g, cfg)
    u = apply_ground_boundary(u_col, local_terrain_height_m, cfg.ground, cfg)
    if u.size != cfg.n_height:
        raise ValueError(f"column length {u.size} != grid size {cfg.n_height}")
    return _Marcher(cfg, direction).step(u, g)


def absorber_taper(cfg: PweConfig) -> np.ndarray:
    """Raised-cosine window over the top ``absorber_fraction`` of the grid."""
    n = cfg.n_height
    na = cfg.n_absorber
    t = np.ones(n)
    if na > 0:
        s = (np.arange(na) + 1.0) / na
        t[n - na:] = 0.5 * (1.0 + np.cos(np.pi * s))
    return t


# ---------------------------------------------------------------------------
# calibration

def free_space_path_loss_db(range_m, frequency_hz):
    lam = 299_792_458.0 / frequency_hz
    return 20.0 * np.log10(4.0 * np.pi * np.asarray(range_m, dtype=float) / lam)


def free_space_axis_amplitude(antenna: AntennaConfig, cfg: PweConfig) -> np.ndarray:
    """On-axis amplitude of the same aperture marched in free space.

    Paraxial marching is tilt invariant (a tilt is a shear of the solution),
    so the run uses an untilted beam centred in a doubled periodic domain with
    absorbers at both ends.  Returns one amplitude per range station.
    """
    n = 2 * cfg.n_height
    dy = cfg.delta_height_m
    k0 = cfg.k0
    w = aperture_width(antenna.beamwidth_deg, k0)
    y = (np.arange(n) - n // 2) * dy
    u = np.exp(-(y / w) ** 2).astype(complex)
    na = int(round(cfg.absorber_fraction * n / 2))
    taper = np.ones(n)
    if na > 0:
        s = (np.arange(na) + 1.0) / na
        edge = 0.5 * (1.0 + np.cos(np.pi * s))
        taper[n - na:] = edge
        taper[:na] = edge[::-1]
    mult = spectral_multiplier(n, dy, cfg.delta_range_m, k0, +1)
    amp = np.empty(cfg.n_range + 1)
    amp[0] = 1.0
    for i in range(1, cfg.n_range + 1):
        u = sfft.ifft(mult * sfft.fft(u, norm="ortho"), norm="ortho") * taper
        amp[i] = abs(u[n // 2])
    return amp


# ---------------------------------------------------------------------------
# two-way marching

def _staircase(terrain, cfg):
    if np.any(terrain(cfg.ranges) < 0):
        raise ConfigurationError("terrain elevations must be >= 0 (the height grid starts at 0)")
    g = np.array([ground_index(h, cfg) for h in terrain(cfg.ranges)])
    if np.any(g >= cfg.n_height - 1):
        bad = int(np.argmax(g >= cfg.n_height - 1))
        raise SimulationError(
            f"terrain at range {cfg.ranges[bad]:.1f} m reaches the domain top ({cfg.domain_height_m:.1f} m)")
    return g


def _read(u, f):
    """Linear interpolation of the column at fractional grid index ``f``."""
    k = int(math.floor(f))
    t = f - k
    if k + 1 >= u.size:
        return u[-1]
    return (1.0 - t) * u[k] + t * u[k + 1]


class _TwoWay:
    """Forward and backward sweeps over the staircase.

    Station ``n`` carries the surface ``G[n]``; the section between stations
    ``n`` and ``n+1`` is marched over ``S[n] = min(G[n], G[n+1])``, so a crest
    sampled at a single station acts as a zero-thickness screen.  Whatever part
    of an incoming field lies at or below ``G[n]`` hits a facet.
    """

    def __init__(self, terrain, antenna, cfg):
        self.cfg = cfg
        self.G = _staircase(terrain, cfg)
        self.S = np.minimum(self.G[:-1], self.G[1:])
        self.taper = absorber_taper(cfg)
        self.gamma = cfg.ground.facet_reflection()
        self.fwd = _Marcher(cfg, +1)
        self.bwd = _Marcher(cfg, -1)
        self.pec = cfg.ground.is_pec
        # fractional receiver index above the staircase surface
        self.rx = self.G + antenna.rx_height_m / cfg.delta_height_m

    def _top(self, g):
        return g + 1 if self.pec else g

    def _check(self, u, n, label):
        if not np.all(np.isfinite(u)):
            raise NumericalFailure(f"non-finite field in {label} sweep at range step {n}", step=n)

    def _facet(self, u, n, conj_out):
        """Clip ``u`` at station ``n``; return the reflected part (or None)."""
        top = self._top(self.G[n])
        hit = u[:top]
        out = None
        if np.any(hit != 0):
            out = np.zeros_like(u)
            out[:top] = np.conj(self.gamma * hit) if conj_out else self.gamma * np.conj(hit)
        u[:top] = 0.0
        return out

    def forward_sweep(self, sources, keep=False):
        """March toward increasing range.

        Returns receiver readings per station, the conjugated facet reflections
        (sources of a backward sweep) and, if ``keep``, every column.
        """
        N = self.cfg.n_range
        u = np.zeros(self.cfg.n_height, dtype=complex)
        readings = np.zeros(N + 1, dtype=complex)
        reflected = {}
        cols = [] if keep else None
        for n in range(N + 1):
            if n > 0:
                u = self.fwd.step(u, self.S[n - 1]) * self.taper
            r = self._facet(u, n, conj_out=True)
            if r is not None and n > 0:
                reflected[n] = r
            if n in sources:
                u = u + sources[n]
            self._check(u, n, "forward")
            readings[n] = _read(u, self.rx[n])
            if keep:
                cols.append(u.copy())
        return readings, reflected, cols

    def backward_sweep(self, sources):
        """March toward the source on the conjugate field; readings come back unconjugated."""
        N = self.cfg.n_range
        b = np.zeros(self.cfg.n_height, dtype=complex)
        readings = np.zeros(N + 1, dtype=complex)
        reflected = {}
        for n in range(N, -1, -1):
            if n < N:
                b = self.bwd.step(b, self.S[n]) * self.taper
            r = self._facet(b, n, conj_out=False)
            if r is not None and n < N:
                reflected[n] = r
            if n in sources:
                b = b + sources[n]
            self._check(b, n, "backward")
            readings[n] = np.conj(_read(b, self.rx[n]))
        return readings, reflected


def _prepare(terrain, antenna, cfg):
    cfg = cfg.replace(frequency_hz=antenna.frequency_hz)
    if cfg.ground.is_pec is False and cfg.ground.eps_r <= 1.0:
        raise ConfigurationError("lossy ground needs eps_r > 1")
    solver = _TwoWay(terrain, antenna, cfg)
    src = gaussian_source(antenna, terrain, cfg)
    src = apply_ground_boundary(src, terrain(0.0), cfg.ground, cfg) * solver.taper
    return cfg, solver, src


def _total_readings(solver, src, cfg):
    total, reflected, _ = solver.forward_sweep({0: src})
    for sweep in range(1, cfg.max_reflections + 1):
        if not reflected:
            break
        if sweep % 2 == 1:
            readings, reflected = solver.backward_sweep(reflected)
        else:
            readings, reflected, _ = solver.forward_sweep(reflected)
        total = total + readings
    return total


def run_two_way(terrain: TerrainProfile, antenna: AntennaConfig, cfg: PweConfig) -> PathLossTrace:
    """Path loss versus range from a two-way PE run.

    The antenna frequency overrides ``cfg.frequency_hz``.  Path loss is
    calibrated against a free-space run of the same aperture::

        PL(x) = FSPL(x) - 20 log10(|u(x, y_rx)| / |u_fs(x, axis)|)

    and reported at every range station from ``cfg.near_field_steps`` on.
    """
    cfg, solver, src = _prepare(terrain, antenna, cfg)
    total = _total_readings(solver, src, cfg)
    ref = free_space_axis_amplitude(antenna, cfg)
    idx = np.arange(max(cfg.near_field_steps, 1), cfg.n_range + 1)
    ranges = cfg.ranges[idx]
    with np.errstate(divide="ignore"):
        pl = free_space_path_loss_db(ranges, cfg.frequency_hz) - 20.0 * np.log10(np.abs(total[idx]) / ref[idx])
    if not np.all(np.isfinite(pl)):
        bad = idx[~np.isfinite(pl)][0]
        raise NumericalFailure(f"zero field at the receiver at range step {bad}", step=int(bad))
    return PathLossTrace(ranges, pl)


def march_field(terrain: TerrainProfile, antenna: AntennaConfig, cfg: PweConfig) -> ComplexField:
    """Forward-sweep field on the whole grid (one-way), for inspection and plots."""
    cfg, solver, src = _prepare(terrain, antenna, cfg)
    _, _, cols = solver.forward_sweep({0: src}, keep=True)
    return ComplexField(np.column_stack(cols), cfg)
