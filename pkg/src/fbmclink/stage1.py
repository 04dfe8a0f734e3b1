"""Stage 1: high-rate ZF/MMSE equalizers via frequency sampling, plus the
single-tap per-subcarrier baseline.

All matrix solves go through numpy's least-squares (QR/SVD based, backward
stable); no explicit inverses are formed.
"""

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigError, SingularChannelError

_COND_CUTOFF = 1e12  # condition number of H~^H H~ beyond which a bin is singular


class HighRateEqualizer:
    """Matrix FIR equalizer G[l], shape (N_t, N_r, L_g), with target delay alpha*M/2."""

    def __init__(self, taps, alpha, criterion, M):
        self.taps = np.asarray(taps, dtype=complex)
        self.alpha = int(alpha)
        self.criterion = criterion
        self.M = int(M)

    @property
    def L_g(self):
        return self.taps.shape[2]


class SingleTapEqualizer:
    """Per-subcarrier combining matrices W_m, shape (M, N_t, N_r)."""

    def __init__(self, W, criterion):
        self.W = np.asarray(W, dtype=complex)
        self.criterion = criterion

    @property
    def M(self):
        return self.W.shape[0]


def _regularized_solve(A, lam):
    """(A^H A + lam I)^{-1} A^H via stacked least squares; shape (N_t, N_r)."""
    N_r, N_t = A.shape
    if lam == 0:
        s = np.linalg.svd(A, compute_uv=False)
        # H~^H H~ is N_t x N_t; fewer rows than columns leaves it rank-deficient
        if N_r < N_t or s[-1] == 0 or (s[0] / s[-1]) ** 2 > _COND_CUTOFF:
            raise SingularChannelError("rank-deficient channel matrix")
        return np.linalg.lstsq(A, np.eye(N_r, dtype=complex), rcond=None)[0]
    B = np.vstack([A, np.sqrt(lam) * np.eye(N_t, dtype=complex)])
    C = np.vstack([np.eye(N_r, dtype=complex), np.zeros((N_t, N_r), dtype=complex)])
    return np.linalg.lstsq(B, C, rcond=None)[0]


def zf_freq_response(csi, omega_k, alpha):
    """Zero-forcing response G~(omega) = (H~^H H~)^{-1} H~^H e^{-j omega alpha M/2}.

    Raises SingularChannelError (identifying omega) when H~(omega) is
    rank-deficient at the 1e12 condition-number cutoff.
    """
    A = csi.response_at(omega_k)
    try:
        X = _regularized_solve(A, 0.0)
    except SingularChannelError:
        raise SingularChannelError(
            f"channel matrix singular at omega={omega_k:.6g}") from None
    return X * np.exp(-1j * omega_k * alpha * csi.M / 2)


def mmse_freq_response(csi, omega_k, alpha, sigma_z2, P_s):
    """MMSE response: ZF with a (sigma_z2/P_s) I ridge in the normal equations.

    With sigma_z2 = 0 this falls through to the ZF formula exactly.
    """
    if sigma_z2 == 0:
        return zf_freq_response(csi, omega_k, alpha)
    A = csi.response_at(omega_k)
    X = _regularized_solve(A, sigma_z2 / P_s)
    return X * np.exp(-1j * omega_k * alpha * csi.M / 2)


def alpha_bound(L_h, L_g, M):
    """Largest admissible delay index: ceil(2(L_h+L_g-1)/M) - 1."""
    return int(np.ceil(2 * (L_h + L_g - 1) / M)) - 1


def frequency_sample(designer, L_g, alpha, M, criterion="zf"):
    """Realize a frequency-response designer as an FIR filter by uniform sampling.

    G[l] = (1/L_g) sum_k G~(2 pi k/L_g) e^{j 2 pi l k/L_g}. The designer closure
    must already include the alpha delay phase; alpha is recorded on the result.
    """
    if L_g < M:
        import warnings
        warnings.warn(f"L_g={L_g} below the minimum sampling count M={M}")
    samples = []
    for k in range(L_g):
        try:
            samples.append(designer(2 * np.pi * k / L_g))
        except SingularChannelError as exc:
            raise SingularChannelError(f"bin {k}: {exc}") from None
    G = np.fft.ifft(np.stack(samples, axis=0), axis=0)   # (L_g, N_t, N_r)
    return HighRateEqualizer(np.moveaxis(G, 0, 2), alpha, criterion, M)


def design_highrate(csi, L_g=None, alpha=1, criterion="zf", sigma_z2=0.0, P_s=1.0):
    """Stage-1 design with precondition checks (alpha range, criterion name)."""
    M = csi.M
    if L_g is None:
        L_g = M
    L_h = csi.time_taps.shape[2]
    bound = alpha_bound(L_h, L_g, M)
    if not 0 <= alpha <= bound:
        raise ConfigError(f"alpha={alpha} outside the admissible range [0, {bound}]")
    if criterion == "zf":
        designer = lambda w: zf_freq_response(csi, w, alpha)
    elif criterion == "mmse":
        designer = lambda w: mmse_freq_response(csi, w, alpha, sigma_z2, P_s)
    else:
        raise ConfigError(f"unknown criterion {criterion!r} (zf|mmse)")
    return frequency_sample(designer, L_g, alpha, M, criterion)


def apply_highrate(y, eq):
    """x-hat[l] = (G conv y)[l]; output length = input length + L_g - 1."""
    y = np.asarray(y, dtype=complex)
    if y.ndim == 1:
        y = y[None]
    if y.shape[0] != eq.taps.shape[1]:
        raise ValueError(f"{y.shape[0]} antenna streams for N_r={eq.taps.shape[1]}")
    return fftconvolve(eq.taps, y[None, :, :], axes=2).sum(axis=1)


def single_tap(csi, criterion="zf", sigma_z2=0.0, P_s=1.0):
    """Per-subcarrier one-tap ZF/MMSE combining at omega = 2 pi m/M.

    No delay phase is applied (the baseline demodulates first and combines
    bins, so alpha = 0 for this scheme).
    """
    M = csi.M
    W = np.empty((M, csi.N_t, csi.N_r), dtype=complex)
    for m in range(M):
        omega = 2 * np.pi * m / M
        if criterion == "zf":
            W[m] = zf_freq_response(csi, omega, 0)
        elif criterion == "mmse":
            W[m] = mmse_freq_response(csi, omega, 0, sigma_z2, P_s)
        else:
            raise ConfigError(f"unknown criterion {criterion!r} (zf|mmse)")
    return SingleTapEqualizer(W, criterion)


def equivalent_channel(eq, H):
    """H_eq[l] = (G conv H)[l], shape (N_t, N_t_users, L_g + L_h - 1)."""
    G = eq.taps[:, None, :, :]                       # (N_t, 1, N_r, L_g)
    Hm = np.moveaxis(H.taps, 0, 1)[None, :, :, :]    # (1, N_t', N_r, L_h)
    return fftconvolve(G, Hm, axes=3).sum(axis=2)
