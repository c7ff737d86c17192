"""Scenario generation: hexagonal layout, user drop, fading channels.

Channels are stored already divided by the square root of each user's
total noise power (thermal noise plus interference from uncoordinated
cells), so the SINR model only has unit noise.
"""

from dataclasses import dataclass, field, fields, replace
import math

import numpy as np

REF_DISTANCE = 200.0
PATHLOSS_EXPONENT = 3.5

# purpose tags for the per-user RNG streams
_TOPOLOGY, _SHADOWING, _FADING = 0, 1, 2

# axial hex directions, counter-clockwise
_HEX_DIRS = ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))


def snr_to_power(snr_db, sigma2=1.0):
    """Per-BS power ``P`` for an SNR ``P / sigma2`` given in dB."""
    return sigma2 * 10.0 ** (snr_db / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    M_total: int = 27
    M: int = 7
    coordinated: tuple | None = None
    N: int = 3
    T: int = 6
    Q: int = 3
    D_BS: float = 2000.0
    D: float = 1000.0
    sigma2: float = 1.0
    snr_db: float = 30.0
    shadowing_db: float = 8.0
    pathloss_on_amplitude: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.coordinated is None:
            object.__setattr__(self, "coordinated", tuple(range(self.M)))
        else:
            object.__setattr__(self, "coordinated", tuple(int(c) for c in self.coordinated))
            object.__setattr__(self, "M", len(self.coordinated))
        self.validate()

    def validate(self):
        for name in ("M_total", "M", "N", "T", "Q"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.Q > self.T:
            raise ValueError(f"Q={self.Q} exceeds T={self.T}")
        co = self.coordinated
        if len(set(co)) != len(co) or not all(0 <= c < self.M_total for c in co):
            raise ValueError("coordinated must be distinct cell ids in [0, M_total)")
        if not (self.D > 0 and self.D_BS > 0):
            raise ValueError("D and D_BS must be positive")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if self.shadowing_db < 0:
            raise ValueError("shadowing_db must be >= 0")

    @property
    def P(self):
        return snr_to_power(self.snr_db, self.sigma2)

    @property
    def uncoordinated(self):
        co = set(self.coordinated)
        return tuple(c for c in range(self.M_total) if c not in co)

    def with_(self, **kw):
        if "M" in kw and "coordinated" not in kw:
            kw["coordinated"] = None
        return replace(self, **kw)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["coordinated"] = list(self.coordinated)
        return d


def hex_spiral(count):
    """Axial coordinates of ``count`` hexagons, center first, then ring by ring."""
    cells = [(0, 0)]
    radius = 1
    while len(cells) < count:
        q, r = _HEX_DIRS[4][0] * radius, _HEX_DIRS[4][1] * radius
        for dq, dr in _HEX_DIRS:
            for _ in range(radius):
                cells.append((q, r))
                q, r = q + dq, r + dr
        radius += 1
    return cells[:count]


def hex_positions(count, spacing):
    axial = np.array(hex_spiral(count), dtype=float)
    x = spacing * (axial[:, 0] + 0.5 * axial[:, 1])
    y = spacing * (math.sqrt(3) / 2.0) * axial[:, 1]
    return np.stack([x, y], axis=1)


def _user_rng(seed, purpose, cell, n, k):
    return np.random.default_rng([int(seed), purpose, cell, n, k])


@dataclass
class Topology:
    bs_positions: np.ndarray      # (M_total, 2)
    user_positions: np.ndarray    # (M, N, Q, 2), users of coordinated cells


def generate_topology(cfg):
    bs = hex_positions(cfg.M_total, cfg.D_BS)
    users = np.empty((cfg.M, cfg.N, cfg.Q, 2))
    r_in2, r_out2 = (0.9 * cfg.D) ** 2, cfg.D**2
    for j, cell in enumerate(cfg.coordinated):
        for n in range(cfg.N):
            for k in range(cfg.Q):
                rng = _user_rng(cfg.seed, _TOPOLOGY, cell, n, k)
                u_r, u_a = rng.random(2)
                radius = math.sqrt(r_in2 + (r_out2 - r_in2) * u_r)
                angle = 2.0 * math.pi * u_a
                users[j, n, k] = bs[cell] + radius * np.array([math.cos(angle), math.sin(angle)])
    return Topology(bs, users)


@dataclass
class ChannelSet:
    """Noise-normalized channels.

    ``h[m, j, n, k]`` is the channel from coordinated BS ``m`` to user
    ``k`` of coordinated cell ``j`` on sub-channel ``n``; ``eta[j, n, k]``
    is that user's total noise power before normalization.
    """

    h: np.ndarray
    eta: np.ndarray
    gain: np.ndarray = field(default=None, repr=False)   # (M_total, M, N, Q) raw power gains

    @property
    def shape(self):
        M, _, N, Q, T = self.h.shape
        return M, N, Q, T

    def direct(self):
        """Serving-BS channels, shape (M, N, Q, T)."""
        M = self.h.shape[0]
        return self.h[np.arange(M), np.arange(M)]


def path_gain(d):
    return (REF_DISTANCE / np.asarray(d, dtype=float)) ** PATHLOSS_EXPONENT


def generate_channels(cfg, topo):
    M, N, Q, T = cfg.M, cfg.N, cfg.Q, cfg.T
    diff = topo.user_positions[None] - topo.bs_positions[:, None, None, None]
    dist = np.linalg.norm(diff, axis=-1)             # (M_total, M, N, Q)
    shadow_db = np.empty_like(dist)
    fading = np.empty((cfg.M_total, M, N, Q, T), dtype=complex)
    for j, cell in enumerate(cfg.coordinated):
        for n in range(N):
            for k in range(Q):
                rng = _user_rng(cfg.seed, _SHADOWING, cell, n, k)
                shadow_db[:, j, n, k] = cfg.shadowing_db * rng.standard_normal(cfg.M_total)
                rng = _user_rng(cfg.seed, _FADING, cell, n, k)
                z = rng.standard_normal((cfg.M_total, T, 2))
                fading[:, j, n, k] = (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2.0)
    factor = path_gain(dist) * 10.0 ** (shadow_db / 10.0)
    # factor is a power gain unless the literal amplitude reading is requested
    amp = factor if cfg.pathloss_on_amplitude else np.sqrt(factor)
    unco = list(cfg.uncoordinated)
    eta = cfg.sigma2 + factor[unco].sum(axis=0) * (cfg.P / N)
    co = list(cfg.coordinated)
    raw = amp[co][..., None] * fading[co]
    h = raw / np.sqrt(eta)[None, ..., None]
    return ChannelSet(h=h, eta=eta, gain=factor)


@dataclass
class Scenario:
    cfg: ScenarioConfig
    topology: Topology
    channels: ChannelSet

    @property
    def P(self):
        return self.cfg.P


def make_scenario(cfg):
    topo = generate_topology(cfg)
    return Scenario(cfg, topo, generate_channels(cfg, topo))
