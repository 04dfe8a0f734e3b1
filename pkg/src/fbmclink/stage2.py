"""Stage 2: turn the high-rate equalizer into low-rate per-subcarrier
equalizers.

The production path is the two-step decimation: the analysis filter output is
decimated by D1, a short equalizer g-bar (least-squares fit, length L'_g) runs
at the intermediate rate, and a final D2-fold decimation brings the stream to
the symbol rate (D1*D2 = M/2). g-bar is realized as D2 polyphase branches so
every multiplication happens at the lowest possible rate.

method1_bandpass / method2_periodize are the two reference constructions of
g-bar; the least-squares fit is what build_lowrate_receiver uses.
"""

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import fftconvolve

from .errors import ConfigError
from .fbmc import _afb
from .stage1 import design_highrate


class DecimationPlan:
    """Two-step decimation factors: D1 = M/2^eta, D1*D2 = M/2."""

    def __init__(self, M, D1, D2=None):
        M, D1 = int(M), int(D1)
        if D1 < 1 or M % D1 != 0 or (M // D1) & (M // D1 - 1) != 0 or D1 > M // 2:
            raise ConfigError(
                f"D1={D1} invalid: need D1 = M/2^eta with eta in 1..log2(M), M={M}")
        if D2 is None:
            D2 = (M // 2) // D1
        if D1 * D2 != M // 2:
            raise ConfigError(f"D1*D2 = {D1 * D2} != M/2 = {M // 2}")
        self.M, self.D1, self.D2 = M, D1, int(D2)

    def __repr__(self):
        return f"DecimationPlan(M={self.M}, D1={self.D1}, D2={self.D2})"

    def __eq__(self, other):
        return (isinstance(other, DecimationPlan)
                and (self.M, self.D1, self.D2) == (other.M, other.D1, other.D2))


def decimate(x, D, phase=0):
    """Keep every D-th sample starting at `phase`."""
    if D < 1:
        raise ValueError("D must be >= 1")
    if not 0 <= phase < D:
        raise ValueError(f"phase must be in [0, {D}), got {phase}")
    return np.asarray(x)[phase::D]


def method1_bandpass(g, m, M, bp_len=None):
    """Reference Method 1: band-pass projection of g onto subcarrier m's band.

    Convolves g with a truncated, raised-cosine-windowed kernel
    (2/M) sinc(2l/M) e^{j 2 pi m l / M}. Returns the full convolution of length
    len(g) + bp_len - 1; the kernel centre sits at offset (bp_len-1)/2, so
    output[i + (bp_len-1)/2] aligns with g[i].
    """
    if bp_len is None:
        bp_len = 16 * M + 1
    if bp_len % 2 == 0:
        raise ValueError("bp_len must be odd")
    c = (bp_len - 1) // 2
    x = np.arange(bp_len) - c
    win = 0.5 * (1.0 + np.cos(np.pi * x / (c + 1)))
    kern = (2.0 / M) * np.sinc(2.0 * x / M) * np.exp(2j * np.pi * m * x / M) * win
    return np.convolve(np.asarray(g, dtype=complex), kern)


def method2_periodize(g, m, M):
    """Reference Method 2: replicate the in-band spectrum with period 4 pi / M.

    The DFT bins in [2 pi (m-1)/M, 2 pi (m+1)/M) are copied onto the whole
    circle with step 4 pi / M. Input is zero-padded to a multiple of M so the
    band boundaries land on bins; output has the padded length.
    """
    g = np.asarray(g, dtype=complex)
    N = ((g.size + M - 1) // M) * M
    G = np.fft.fft(g, n=N)
    bpm = N // M                     # bins per subcarrier spacing
    out = np.zeros(N, dtype=complex)
    start = (m - 1) * bpm
    src = (start + np.arange(2 * bpm)) % N
    for p in range(M // 2):
        dst = (start + np.arange(2 * bpm) + p * 2 * bpm) % N
        out[dst] = G[src]
    return np.fft.ifft(out)


def _decimated_analysis(pf, m, D1):
    """Causal D1-decimated time-reversed-conjugate analysis filter.

    b[k] = f_m^*[(N_f-1-k) D1], k = 0..N_f-1 with N_f = L_f/D1; entry k sits at
    true low-rate lag k - (N_f-1).
    """
    f_m = pf.subcarrier_filter(m)
    N_f = pf.L_f // D1
    k = np.arange(N_f)
    return np.conj(f_m[(N_f - 1 - k) * D1])


def ls_fit(g, pf, m, plan, Lg_prime):
    """Least-squares low-rate equalizer for one (subcarrier, scalar g) pair.

    Minimizes sum_n |E_(a)[n] - E_(c)[n]|^2 where E_(a) = (g conv f_m^*[-.])
    decimated by D1 and E_(c) = (f_m^*[-.])_{down D1} conv g-bar, both indexed
    causally from low-rate lag -(L_f/D1 - 1).
    """
    if Lg_prime < 1:
        raise ConfigError(f"Lg_prime must be >= 1, got {Lg_prime}")
    g = np.asarray(g, dtype=complex)
    D1 = plan.D1
    if pf.L_f % D1 != 0:
        raise ConfigError(f"D1={D1} does not divide L_f={pf.L_f}")
    b = _decimated_analysis(pf, m, D1)
    N_f = b.size
    rows = N_f + Lg_prime - 1
    F = toeplitz(np.concatenate([b, np.zeros(Lg_prime - 1)]),
                 np.concatenate([b[:1], np.zeros(Lg_prime - 1)]))
    f_m = pf.subcarrier_filter(m)
    c = np.convolve(g, np.conj(f_m[::-1]))
    e_full = c[D1 - 1::D1]           # causal decimation, lag -(N_f-1) first
    if Lg_prime < g.size / D1:
        e = e_full[:rows]
    else:
        e = np.concatenate([e_full, np.zeros(rows - e_full.size, dtype=complex)])
    gbar, *_ = np.linalg.lstsq(F, e, rcond=None)
    return gbar


def polyphase_split(gbar, D2):
    """Branch decomposition G_l[n] = g-bar[D2 n + l], l = 0..D2-1."""
    gbar = np.asarray(gbar)
    return [gbar[l::D2] for l in range(D2)]


class LowRateEqualizerBank:
    """Per-(m, r, u) low-rate equalizers with their polyphase branches.

    gbar has shape (n_subcarriers, N_t, N_r, L'_g); `subcarriers` lists the m
    value of each leading index (all M of them by default). branches[l] is
    gbar[..., l::D2].
    """

    def __init__(self, gbar, subcarriers, plan, alpha, criterion):
        self.gbar = np.asarray(gbar, dtype=complex)
        self.subcarriers = list(subcarriers)
        self.plan = plan
        self.alpha = int(alpha)
        self.criterion = criterion
        self.branches = [self.gbar[..., l::plan.D2] for l in range(plan.D2)]

    @property
    def Lg_prime(self):
        return self.gbar.shape[-1]

    def taps_for(self, m):
        return self.gbar[self.subcarriers.index(m)]


def build_lowrate_receiver(csi, pf, plan, criterion="zf", alpha=1, Lg_prime=5,
                           sigma_z2=0.0, P_s=1.0, L_g=None, subcarriers=None):
    """Full two-stage design: Stage-1 filter, then per-(m,r,u) LS fits.

    `subcarriers` restricts the bank to a subset of m values (default: all M).
    """
    eq = design_highrate(csi, L_g=L_g, alpha=alpha, criterion=criterion,
                         sigma_z2=sigma_z2, P_s=P_s)
    M = pf.M
    if subcarriers is None:
        subcarriers = list(range(M))
    N_t, N_r, L_g_eff = eq.taps.shape
    D1 = plan.D1
    N_f = pf.L_f // D1
    rows = N_f + Lg_prime - 1
    gbar = np.empty((len(subcarriers), N_t, N_r, Lg_prime), dtype=complex)
    flat_g = eq.taps.reshape(N_t * N_r, L_g_eff)
    for i, m in enumerate(subcarriers):
        b = _decimated_analysis(pf, m, D1)
        F = toeplitz(np.concatenate([b, np.zeros(Lg_prime - 1)]),
                     np.concatenate([b[:1], np.zeros(Lg_prime - 1)]))
        f_m = pf.subcarrier_filter(m)
        conv = fftconvolve(flat_g, np.conj(f_m[::-1])[None, :], axes=1)
        e_full = conv[:, D1 - 1::D1]
        if Lg_prime < L_g_eff / D1:
            E = e_full[:, :rows]
        else:
            E = np.concatenate(
                [e_full, np.zeros((flat_g.shape[0], rows - e_full.shape[1]),
                                  dtype=complex)], axis=1)
        sol, *_ = np.linalg.lstsq(F, E.T, rcond=None)
        gbar[i] = sol.T.reshape(N_t, N_r, Lg_prime)
    return LowRateEqualizerBank(gbar, subcarriers, plan, alpha, criterion)


def equalize_lowrate(y, bank, pf):
    """Run the low-rate receiver: AFB at rate 1/D1, polyphase branches, sum.

    Parameters
    ----------
    y : ndarray (N_r, n_samples) or (n_samples,)
    bank : LowRateEqualizerBank
    pf : PrototypeFilter

    Returns
    -------
    ndarray, complex, shape (N_t, n_subcarriers, n_instants): raw symbol-rate
    estimates at receive instants nu = 0, 1, ...; symbol n of the transmit grid
    appears at nu = n + alpha and needs Re{. e^{-j theta_{m,n}}}.
    """
    y = np.asarray(y, dtype=complex)
    if y.ndim == 1:
        y = y[None]
    plan = bank.plan
    D1, D2, M = plan.D1, plan.D2, plan.M
    N_f = pf.L_f // D1
    n_sub, N_t, N_r, Lgp = bank.gbar.shape
    if y.shape[0] != N_r:
        raise ValueError(f"{y.shape[0]} antenna streams for N_r={N_r}")
    if y.shape[1] < pf.L_f:
        raise ValueError("stream too short for one analysis window")
    nu_max = (y.shape[1] - 1) // (M // 2)
    v_lo = -(N_f - 1) - (Lgp - 1)        # lowest low-rate index ever touched
    v_hi = nu_max * D2
    n1 = np.arange(v_lo, v_hi + 1)
    sub_idx = np.asarray(bank.subcarriers)
    n_nu = nu_max + 1
    out = np.zeros((N_t, n_sub, n_nu), dtype=complex)
    # gather index per branch: column of v supplying tap i of branch l at nu
    nu = np.arange(n_nu)
    for r in range(N_r):
        V = _afb(y[r], pf, n1 * D1)[sub_idx, :]      # (n_sub, len(n1))
        for l in range(D2):
            br = bank.branches[l][:, :, r, :]        # (n_sub, N_t, len_l)
            len_l = br.shape[-1]
            if len_l == 0:
                continue
            cols = (nu[:, None] - np.arange(len_l)[None, :]) * D2 - l - v_lo
            Vg = V[:, cols]                          # (n_sub, n_nu, len_l)
            out += np.einsum("sni,usi->usn", Vg,
                             np.moveaxis(br, 1, 0))
    return out


def recover_symbols(dgrid, alpha, N_d):
    """Phase-compensate a raw receive grid and extract transmit instants.

    dgrid: (..., M, n_instants) raw estimates with symbol n at index n+alpha.
    Returns the real OQAM estimates, shape (..., M, N_d).
    """
    dgrid = np.asarray(dgrid)
    M = dgrid.shape[-2]
    n = np.arange(N_d)
    m = np.arange(M)[:, None]
    comp = np.exp(-1j * np.pi * (m + n[None, :]) / 2)
    return (dgrid[..., alpha:alpha + N_d] * comp).real
