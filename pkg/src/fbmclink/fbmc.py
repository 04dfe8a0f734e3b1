"""FBMC/OQAM core: prototype filter, OQAM mapping, synthesis and analysis banks.

Conventions used throughout the package:

* prototype p[l], l = 0..L_f-1, L_f = kappa*M, symmetric and unit energy;
* subcarrier filter f_m[t] = p[t] * exp(j*2*pi*m*(t - (L_f-1)/2)/M); the phase is
  referenced to the prototype's symmetry centre so that the lattice is orthogonal
  in the real domain (see module tests for the measured residual floor);
* transmit atom F_{m,n}[l] = f_m[l - n*M/2] * phase_factor(m, n);
* the analysis bank output for instant n is the matched-filter output
  (y conv f_m^*[-.]) sampled at lag n*M/2, i.e. sum_t y[n*M/2 + t] f_m^*[t].

A burst of N_d symbol instants occupies (N_d-1)*M/2 + L_f samples.
"""

import numpy as np

# Frequency-sampling sideband coefficients of the PHYDYAS pulse for
# overlapping factors 2..4 (H_0 = 1 implicit).
_PHYDYAS = {
    2: (np.sqrt(2.0) / 2.0,),
    3: (0.91143783, 0.41143783),
    4: (0.97195983, np.sqrt(2.0) / 2.0, 0.23514695),
}

_J_POW = (1.0 + 0.0j, 1j, -1.0 + 0.0j, -1j)


class PrototypeFilter:
    """Designed prototype pulse plus the lattice geometry it implies.

    Attributes
    ----------
    coeffs : ndarray
        p[l], real, length L_f, unit energy.
    M : int
        Number of subcarriers.
    kappa : int
        Overlapping factor; L_f = kappa*M.
    """

    def __init__(self, coeffs, M, kappa):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.M = int(M)
        self.kappa = int(kappa)

    @property
    def L_f(self):
        return self.coeffs.size

    @property
    def centre(self):
        """Symmetry centre (L_f-1)/2, a half-integer for even L_f."""
        return (self.L_f - 1) / 2.0

    def subcarrier_filter(self, m):
        """f_m[t] = p[t] e^{j 2 pi m (t - centre) / M}, length L_f."""
        t = np.arange(self.L_f)
        return self.coeffs * np.exp(2j * np.pi * m * (t - self.centre) / self.M)

    def __repr__(self):
        return f"PrototypeFilter(kappa={self.kappa}, M={self.M})"


def design_prototype(kappa, M):
    """Design the PHYDYAS prototype via frequency sampling.

    Parameters
    ----------
    kappa : int
        Overlapping factor, one of {2, 3, 4}.
    M : int
        Number of subcarriers (power of two, >= 4).

    Returns
    -------
    PrototypeFilter
        Symmetric, unit-energy pulse of length kappa*M.
    """
    if kappa not in _PHYDYAS:
        raise ValueError(f"unsupported kappa={kappa}; supported: {sorted(_PHYDYAS)}")
    if M < 4 or (M & (M - 1)) != 0:
        raise ValueError(f"M must be a power of two >= 4, got {M}")
    L_f = kappa * M
    l = np.arange(L_f)
    # Frequency-sampling synthesis; the (l + 0.5) argument centres the pulse on
    # the discrete grid so p[l] == p[L_f-1-l] holds exactly.
    p = np.ones(L_f)
    for k, hk in enumerate(_PHYDYAS[kappa], start=1):
        p += 2.0 * (-1) ** k * hk * np.cos(2 * np.pi * k * (l + 0.5) / L_f)
    p /= np.sqrt(np.sum(p * p))
    return PrototypeFilter(p, M, kappa)


def phase_factor(m, n):
    """OQAM phase e^{j pi (m+n)/2}, exact (unit modulus, no rounding)."""
    return _J_POW[(m + n) % 4]


class OqamGrid:
    """Real OQAM symbols s_{m,n} per user: array (N_t, M, N_d) plus symbol power."""

    def __init__(self, symbols, P_s):
        symbols = np.asarray(symbols, dtype=float)
        if symbols.ndim == 2:
            symbols = symbols[None]
        self.symbols = symbols
        self.P_s = float(P_s)

    @property
    def shape(self):
        return self.symbols.shape


def qam_to_oqam(qam, P_s):
    """Stagger complex QAM symbols into a real OQAM grid.

    Each complex symbol at instant k becomes (real part at n=2k, imaginary part
    at n=2k+1), on every subcarrier. P_s is the per-real-symbol power carried as
    grid metadata (half the QAM symbol power for a unit-power constellation).
    """
    qam = np.asarray(qam, dtype=complex)
    if qam.ndim == 2:
        qam = qam[None]
    s = np.empty(qam.shape[:-1] + (2 * qam.shape[-1],), dtype=float)
    s[..., 0::2] = qam.real
    s[..., 1::2] = qam.imag
    return OqamGrid(s, P_s)


def oqam_to_qam(grid):
    """Inverse of qam_to_oqam (exact round trip)."""
    s = grid.symbols if isinstance(grid, OqamGrid) else np.asarray(grid)
    return s[..., 0::2] + 1j * s[..., 1::2]


def _tx_phases(M, N_d, pf):
    """Per-(m,n) transmit phase factor_factor(m,n) * e^{-j 2 pi m centre / M}."""
    m = np.arange(M)[:, None]
    n = np.arange(N_d)[None, :]
    theta = np.exp(1j * np.pi * (m + n) / 2)
    centre_ph = np.exp(-2j * np.pi * m * pf.centre / M)
    return theta * centre_ph


def modulate(grid, pf):
    """Synthesis filter bank: OQAM grid -> per-user sample streams.

    Parameters
    ----------
    grid : OqamGrid
    pf : PrototypeFilter

    Returns
    -------
    ndarray, complex, shape (N_t, (N_d-1)*M/2 + L_f)
    """
    M, L_f = pf.M, pf.L_f
    if grid.symbols.shape[1] != M:
        raise ValueError(
            f"grid has M={grid.symbols.shape[1]} but prototype has M={M}")
    N_t, _, N_d = grid.symbols.shape
    half = M // 2
    frame_len = (N_d - 1) * half + L_f
    phases = _tx_phases(M, N_d, pf)
    out = np.zeros((N_t, frame_len), dtype=complex)
    for u in range(N_t):
        c = grid.symbols[u] * phases
        # one IFFT per symbol instant, periodically extended under the pulse
        b = M * np.fft.ifft(c, axis=0)
        seg = np.tile(b, (pf.kappa, 1)) * pf.coeffs[:, None]
        for n in range(N_d):
            out[u, n * half:n * half + L_f] += seg[:, n]
    return out


def _afb(y, pf, offsets):
    """Analysis bank at arbitrary sample offsets.

    Returns D[m, k] = sum_t y[offsets[k] + t] f_m^*[t]; offsets may be negative,
    the stream is treated as zero outside its support.
    """
    y = np.asarray(y)
    M, L_f = pf.M, pf.L_f
    offsets = np.asarray(offsets, dtype=int)
    lo = int(offsets.min())
    pad_front = max(0, -lo)
    pad_back = max(0, int(offsets.max()) + L_f - y.size)
    ypad = np.pad(y, (pad_front, pad_back))
    idx = (offsets[None, :] + pad_front) + np.arange(L_f)[:, None]
    seg = ypad[idx] * pf.coeffs[:, None]
    folded = seg.reshape(pf.kappa, M, offsets.size).sum(axis=0)
    D = np.fft.fft(folded, axis=0)
    D *= np.exp(2j * np.pi * np.arange(M) * pf.centre / M)[:, None]
    return D


def demodulate(stream, pf, n_out=None):
    """Analysis filter bank: sample stream -> complex grid d_{m,n}.

    The matched-filter outputs are taken at lags n*M/2 (n = 0, 1, ...), the
    alignment under which a loopback burst puts symbol n of the grid at
    instant n. No phase compensation is applied here.

    Parameters
    ----------
    stream : ndarray, complex, 1-D
    pf : PrototypeFilter
    n_out : int, optional
        Number of instants to produce; default: as many full windows as fit.

    Returns
    -------
    ndarray, complex, shape (M, n_out)
    """
    y = np.asarray(stream)
    if y.ndim != 1:
        raise ValueError("demodulate expects a single antenna stream")
    M, L_f = pf.M, pf.L_f
    if y.size < L_f:
        raise ValueError(f"stream too short: {y.size} < L_f={L_f}")
    if n_out is None:
        n_out = (y.size - L_f) // (M // 2) + 1
    offsets = np.arange(n_out) * (M // 2)
    return _afb(y, pf, offsets)


def transmux_response(pf, m, m_prime):
    """Transmultiplexer response F_{m m'}[l] = (f_{m'} conv f_m^*[-.])[l].

    Returns the full sequence of length 2*L_f-1; entry i corresponds to lag
    l = i - (L_f-1). F_{mm}[0] equals 1 by normalization.
    """
    f_mp = pf.subcarrier_filter(m_prime)
    f_m = pf.subcarrier_filter(m)
    return np.convolve(f_mp, np.conj(f_m[::-1]))
