"""Power-delay profiles, Rayleigh channel draws, AWGN, and frequency-domain CSI."""

import os

import numpy as np
from scipy.signal import fftconvolve

# Standard profiles as (delay ns, average power dB) anchor lists (3GPP TS 36.101
# annex B for EVA/ETU, ITU-R M.1225 for the pedestrian profiles).
_STANDARD_PDPS = {
    "EVA": (
        (0, 30, 150, 310, 370, 710, 1090, 1730, 2510),
        (0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9),
    ),
    "ETU": (
        (0, 50, 120, 200, 230, 500, 1600, 2300, 5000),
        (-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -3.0, -5.0, -7.0),
    ),
    "PedA": (
        (0, 110, 190, 410),
        (0.0, -9.7, -19.2, -22.8),
    ),
    "PedB": (
        (0, 200, 800, 1200, 2300, 3700),
        (0.0, -0.9, -4.9, -8.0, -7.8, -23.9),
    ),
}

# Fractional-delay placement kernel: windowed sinc, half-width 5 samples
# (9 nonzero taps per path), applied in power so relative path powers are kept.
_KERNEL_HALF = 4
_KERNEL_WIDTH = 5.0


class PdpProfile:
    """Normalized power-delay profile q[l] on the simulation sample grid."""

    def __init__(self, name, taps, sample_rate):
        taps = np.asarray(taps, dtype=float)
        if taps.ndim != 1 or taps.size == 0:
            raise ValueError("profile taps must be a nonempty 1-D sequence")
        if np.any(taps < 0):
            raise ValueError("profile taps must be nonnegative")
        total = taps.sum()
        if total <= 0:
            raise ValueError("profile has zero total power")
        self.name = name
        self.taps = taps / total
        self.sample_rate = float(sample_rate)

    @property
    def L_h(self):
        return self.taps.size

    def __repr__(self):
        return f"PdpProfile({self.name!r}, L_h={self.L_h})"


def _place_anchors(delays_ns, powers_db, sample_rate):
    """Spread anchor paths onto the sample grid with a fractional-delay kernel."""
    t = np.asarray(delays_ns, dtype=float) * 1e-9 * sample_rate
    p_lin = 10.0 ** (np.asarray(powers_db, dtype=float) / 10.0)
    L_h = int(np.floor(t.max())) + 2 * _KERNEL_HALF + 1
    q = np.zeros(L_h)
    for ti, pi in zip(t, p_lin):
        base = int(np.floor(ti))
        for k in range(base - _KERNEL_HALF, base + _KERNEL_HALF + 1):
            x = k - ti
            if abs(x) >= _KERNEL_WIDTH:
                continue
            w = 0.5 * (1.0 + np.cos(np.pi * x / _KERNEL_WIDTH))
            q[k + _KERNEL_HALF] += pi * (np.sinc(x) * w) ** 2
    return q


def load_pdp(name, sample_rate):
    """Load a standard profile by name, or a custom one from a text file.

    Custom files contain two columns ``delay_ns power_db`` with ``#`` comments.
    Anchors are placed on the 1/sample_rate grid with a band-limited
    fractional-delay kernel and normalized to unit total power.  An
    already-constructed PdpProfile passes through unchanged, so tap
    sequences defined directly on the sample grid can be used anywhere a
    profile name is accepted.
    """
    if isinstance(name, PdpProfile):
        return name
    if name in _STANDARD_PDPS:
        delays, powers = _STANDARD_PDPS[name]
        return PdpProfile(name, _place_anchors(delays, powers, sample_rate),
                          sample_rate)
    if os.path.exists(name):
        rows = []
        with open(name) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise ValueError(
                        f"{name}:{lineno}: expected 'delay_ns power_db', got {line!r}")
                try:
                    rows.append((float(parts[0]), float(parts[1])))
                except ValueError:
                    raise ValueError(
                        f"{name}:{lineno}: non-numeric entry in {line!r}") from None
        if not rows:
            raise ValueError(f"{name}: no anchor rows found")
        delays, powers = zip(*rows)
        return PdpProfile(os.path.basename(name),
                          _place_anchors(delays, powers, sample_rate), sample_rate)
    raise ValueError(
        f"unknown profile {name!r}: expected one of {sorted(_STANDARD_PDPS)} "
        "or a readable custom file path")


def make_rng(seed):
    """Counter-based generator (Philox) from an integer seed, or pass through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(key=int(seed) % (1 << 128)))


def trial_rng(master_seed, trial):
    """Independent per-trial stream keyed by (master seed, trial index)."""
    key = ((int(master_seed) % (1 << 64)) << 64) | (int(trial) % (1 << 64))
    return np.random.Generator(np.random.Philox(key=key))


class ChannelRealization:
    """One block-fading draw: taps (N_r, N_t, L_h_max) plus per-user profiles."""

    def __init__(self, taps, profiles):
        self.taps = np.asarray(taps, dtype=complex)
        self.profiles = list(profiles)

    @property
    def N_r(self):
        return self.taps.shape[0]

    @property
    def N_t(self):
        return self.taps.shape[1]

    @property
    def L_h(self):
        return self.taps.shape[2]


def draw_channel(profiles, N_r, seed):
    """Draw i.i.d. Rayleigh taps h^{r,u}[l] ~ CN(0, q^u[l]).

    Parameters
    ----------
    profiles : PdpProfile or sequence of PdpProfile (one per user)
    N_r : int
    seed : int or numpy Generator

    Returns
    -------
    ChannelRealization
    """
    if isinstance(profiles, PdpProfile):
        profiles = [profiles]
    if N_r < 1:
        raise ValueError("N_r must be >= 1")
    rng = make_rng(seed)
    N_t = len(profiles)
    L_max = max(p.L_h for p in profiles)
    taps = np.zeros((N_r, N_t, L_max), dtype=complex)
    for u, prof in enumerate(profiles):
        scale = np.sqrt(prof.taps / 2.0)
        shape = (N_r, prof.L_h)
        taps[:, u, :prof.L_h] = scale * (rng.standard_normal(shape)
                                         + 1j * rng.standard_normal(shape))
    return ChannelRealization(taps, profiles)


def apply_channel(x, H):
    """y^r = sum_u x^u conv h^{r,u}; output length = input length + L_h - 1."""
    x = np.asarray(x, dtype=complex)
    if x.ndim == 1:
        x = x[None]
    if x.shape[0] != H.N_t:
        raise ValueError(f"{x.shape[0]} streams for {H.N_t} users")
    # batched convolution over (N_r, N_t, time), then sum the user axis
    y = fftconvolve(x[None, :, :], H.taps, axes=2).sum(axis=1)
    return y


def add_awgn(y, sigma_z2, seed):
    """Add circular complex white Gaussian noise of total variance sigma_z2."""
    if sigma_z2 < 0:
        raise ValueError("noise variance must be nonnegative")
    y = np.asarray(y, dtype=complex)
    if sigma_z2 == 0:
        return y.copy()
    rng = make_rng(seed)
    z = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    return y + np.sqrt(sigma_z2 / 2.0) * z


class FreqCsi:
    """Frequency-domain CSI on the M DFT bins.

    H_tilde has shape (M, N_r, N_t). time_taps is the representation used by
    the equalizer designers when they need H_tilde(omega) off the bin grid:
    the true taps for perfect CSI, the full length-M IDFT of the estimated
    bins for estimated CSI (exactly consistent with the bins either way).
    """

    def __init__(self, H_tilde, time_taps, flag="perfect"):
        self.H_tilde = np.asarray(H_tilde, dtype=complex)
        self.time_taps = np.asarray(time_taps, dtype=complex)
        self.flag = flag

    @property
    def M(self):
        return self.H_tilde.shape[0]

    @property
    def N_r(self):
        return self.H_tilde.shape[1]

    @property
    def N_t(self):
        return self.H_tilde.shape[2]

    def response_at(self, omega):
        """H_tilde(omega) = sum_l time_taps[l] e^{-j omega l}, (N_r, N_t)."""
        ph = np.exp(-1j * omega * np.arange(self.time_taps.shape[2]))
        return self.time_taps @ ph


def freq_csi(H, M):
    """Perfect CSI: H_tilde_m = sum_l H[l] e^{-j 2 pi m l / M} for m = 0..M-1."""
    Ht = np.fft.fft(H.taps, n=M, axis=2)          # (N_r, N_t, M)
    return FreqCsi(np.moveaxis(Ht, 2, 0), H.taps, flag="perfect")


def estimate_csi_mmse(csi, P_p, sigma_z2, seed):
    """Training-based linear-MMSE CSI estimate on every bin.

    hat(H_tilde)_m = (P_p H_tilde_m + Z_m) / (P_p + sigma_z2) with
    Z_m i.i.d. CN(0, P_p sigma_z2); P_p = 2 P_s L_p for L_p training symbols.
    """
    if P_p <= 0:
        raise ValueError("P_p must be positive")
    rng = make_rng(seed)
    Z = np.sqrt(P_p * sigma_z2 / 2.0) * (rng.standard_normal(csi.H_tilde.shape)
                                         + 1j * rng.standard_normal(csi.H_tilde.shape))
    H_hat = (P_p * csi.H_tilde + Z) / (P_p + sigma_z2)
    # bin-exact time-domain representation (length M)
    time_taps = np.fft.ifft(np.moveaxis(H_hat, 0, 2), axis=2)
    return FreqCsi(H_hat, time_taps, flag="estimated")
