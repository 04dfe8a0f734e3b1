"""Run configuration: a typed key=value file format, rendering, fingerprints.

Config files are UTF-8 text, one ``key = value`` per line, ``#`` comments.
``D1``, ``L_g`` and ``subcarrier`` accept ``M``-relative notation ("M/4", "M",
"M/2"), resolved against the ``M`` of the same file (or the default).
``parse_config(render_config(cfg)) == cfg`` holds for every valid config.
"""

import hashlib
from dataclasses import dataclass, fields

from .errors import ConfigError
from .stage2 import DecimationPlan

# canonical channel-profile spellings, keyed by lowercase
_CHANNEL_NAMES = {"eva": "EVA", "etu": "ETU", "peda": "PedA", "pedb": "PedB"}
_SCHEME_KINDS = ("single_tap", "two_stage", "highrate")

# Real-symbol power of a unit-average-power QAM constellation after the
# real/imaginary split.
P_SYM = 0.5


@dataclass
class SimConfig:
    """All knobs of one simulation point (defaults: the 8-user benchmark)."""

    M: int = 256
    kappa: int = 4
    N_t: int = 8
    N_r: int = 16
    L_g: int = 0          # 0 resolves to M
    alpha: int = 1
    D1: int = 0           # 0 resolves to M/4
    Lg_prime: int = 5
    criterion: str = "zf"
    gamma_db: float = 10.0
    trials: int = 100
    master_seed: int = 12345
    subcarrier: int = -1  # -1 resolves to M/2
    user: int = 0
    N_d: int = 96
    L_p: int = 8
    sample_rate: float = 7.68e6
    schemes: tuple = ("single_tap", "two_stage")
    channels: tuple = ()  # () resolves to the default assignment

    def __post_init__(self):
        if self.M < 4 or (self.M & (self.M - 1)) != 0:
            raise ConfigError(f"M must be a power of two >= 4, got {self.M}")
        if self.kappa not in (2, 3, 4):
            raise ConfigError(f"kappa must be 2, 3 or 4, got {self.kappa}")
        if self.L_g == 0:
            self.L_g = self.M
        if self.D1 == 0:
            self.D1 = self.M // 4
        if self.subcarrier < 0:
            self.subcarrier = self.M // 2
        self.schemes = tuple(self.schemes)
        self.channels = tuple(self.channels)
        DecimationPlan(self.M, self.D1)
        for name, lo in (("N_t", 1), ("N_r", 1), ("trials", 1), ("L_g", 1),
                         ("Lg_prime", 1), ("alpha", 0), ("L_p", 1),
                         ("master_seed", 0), ("N_d", 2)):
            if getattr(self, name) < lo:
                raise ConfigError(f"{name} must be >= {lo}, got {getattr(self, name)}")
        if self.N_d % 2 != 0:
            raise ConfigError(f"N_d must be even, got {self.N_d}")
        if self.criterion not in ("zf", "mmse"):
            raise ConfigError(f"criterion must be 'zf' or 'mmse', got {self.criterion!r}")
        if not 0 <= self.subcarrier < self.M:
            raise ConfigError(f"subcarrier must be in [0, M), got {self.subcarrier}")
        if not 0 <= self.user < self.N_t:
            raise ConfigError(f"user must be in [0, N_t), got {self.user}")
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")
        for s in self.schemes:
            if s not in _SCHEME_KINDS:
                raise ConfigError(f"unknown scheme {s!r}; known: {_SCHEME_KINDS}")

    @property
    def P_s(self):
        return P_SYM

    def noise_var(self, gamma_db=None):
        """sigma_z^2 for an SNR of gamma_db, referenced to the unit per-user
        transmit power (2 P_s at symbol power P_s = 1/2)."""
        g = self.gamma_db if gamma_db is None else gamma_db
        return 2.0 * P_SYM * 10.0 ** (-g / 10.0)


def channel_assignment(cfg):
    """Per-user profile names: explicit list (cycled over users) or the
    default mix (pairs of EVA/ETU/PedA/PedB for 8 users, round robin else)."""
    if cfg.channels:
        base = cfg.channels
    elif cfg.N_t == 8:
        base = ("EVA", "EVA", "ETU", "ETU", "PedA", "PedA", "PedB", "PedB")
    else:
        base = ("EVA", "ETU", "PedA", "PedB")
    return [base[i % len(base)] for i in range(cfg.N_t)]


_M_RELATIVE = ("D1", "L_g", "subcarrier")


def _resolve_m_expr(key, val, M):
    if val == "M":
        k = 1
    elif val.startswith("M/"):
        try:
            k = int(val[2:])
        except ValueError:
            raise ConfigError(f"{key}: bad M-relative value {val!r}") from None
    else:
        return None
    if k < 1 or M % k != 0:
        raise ConfigError(f"{key} = {val}: {k} does not divide M = {M}")
    if key == "D1" and (k & (k - 1)) != 0:
        raise ConfigError(
            f"D1 = {val} violates the D1 = M/2^eta rule: the divisor must be a"
            " power of two")
    return M // k


def _parse_items(text, base_M=None):
    """key=value lines -> dict of typed SimConfig field values."""
    ftypes = {f.name: f.type for f in fields(SimConfig)}
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in ftypes:
            raise ConfigError(
                f"line {lineno}: unknown config key {key!r}; known keys: "
                + ", ".join(sorted(ftypes)))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = (lineno, val)

    M = base_M if base_M is not None else SimConfig.__dataclass_fields__["M"].default
    if "M" in raw:
        try:
            M = int(raw["M"][1])
        except ValueError:
            raise ConfigError(f"line {raw['M'][0]}: M must be an integer") from None

    items = {}
    for key, (lineno, val) in raw.items():
        t = ftypes[key]
        try:
            if key in _M_RELATIVE:
                resolved = _resolve_m_expr(key, val, M)
                items[key] = int(val) if resolved is None else resolved
            elif t is int:
                items[key] = int(val)
            elif t is float:
                items[key] = float(val)
            elif t is tuple:
                parts = tuple(p.strip() for p in val.split(",") if p.strip())
                if key == "channels":
                    parts = tuple(_CHANNEL_NAMES.get(p.lower(), p) for p in parts)
                items[key] = parts
            else:
                items[key] = val
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError(
                f"line {lineno}: bad value {val!r} for key {key!r}") from None
    return items


def parse_config(text):
    """Parse a config file into a SimConfig (all values validated)."""
    return SimConfig(**_parse_items(text))


def render_config(cfg):
    """Canonical text form; parse_config(render_config(cfg)) == cfg."""
    lines = []
    for f in fields(SimConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def fingerprint(cfg):
    """Short stable hash of a config, for provenance columns in reports."""
    return hashlib.sha256(render_config(cfg).encode()).hexdigest()[:16]
