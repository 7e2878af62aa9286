"""Reference computations shared by the unit and acceptance tests."""
import math

import numpy as np
from scipy.special import fresnel

from terrainuq.pwe import AntennaConfig, PweConfig, free_space_path_loss_db, run_two_way, thin_screen


def centred_beam(w0, n=4096, dy=0.25):
    y = (np.arange(n) - n // 2) * dy
    return y, np.exp(-(y / w0) ** 2).astype(complex)


def beam_width(y, u):
    """1/e amplitude half-width from the second moment of |u|^2."""
    p = np.abs(u) ** 2
    c = np.sum(y * p) / np.sum(p)
    return 2.0 * math.sqrt(np.sum((y - c) ** 2 * p) / np.sum(p))


def gaussian_width(w0, z, k0):
    return w0 * math.sqrt(1 + (2 * z / (k0 * w0 ** 2)) ** 2)


def knife_edge_errors(height=300.0, domain=1024.0, beamwidth=6.0, offset=10.0, d1=1000.0):
    """Excess loss behind a thin screen minus the Fresnel-integral prediction.

    Returns the diffraction parameters in [0, 2] and the matching errors in dB.
    """
    f = 435e6
    lam = 299_792_458.0 / f
    cfg = PweConfig(delta_height_m=0.5, max_height_m=domain, frequency_hz=f, total_range_m=4000,
                    delta_range_m=10, near_field_steps=1)
    tr = run_two_way(thin_screen(4000, d1, height, 0.1), AntennaConfig(height, height - offset, 0, beamwidth, f),
                     cfg)
    x = tr.ranges_m
    sel = x > d1 + 20
    d2 = x[sel] - d1
    excess = tr.path_loss_db[sel] - free_space_path_loss_db(x[sel], f)
    nu = offset * d1 / (d1 + d2) * np.sqrt(2 * (d1 + d2) / (lam * d1 * d2))
    S, C = fresnel(nu)
    oracle = -10 * np.log10(0.5 * ((0.5 - C) ** 2 + (0.5 - S) ** 2))
    keep = (nu >= 0) & (nu <= 2)
    return nu[keep], (excess - oracle)[keep]


def brute_force_loo(P, q):
    """Relative LOO error by refitting without each sample in turn."""
    e = np.empty_like(q)
    for i in range(len(q)):
        m = np.arange(len(q)) != i
        u = np.linalg.lstsq(P[m], q[m], rcond=None)[0]
        e[i] = q[i] - P[i] @ u
    return np.linalg.norm(e) / np.linalg.norm(q)
