"""L-MMSE and finite-alphabet (FL-MMSE) spatial equalization.

The finite-alphabet matrix quantizes every row of the L-MMSE matrix to a
k-bit midrise grid whose step is tied to that row's largest real or
imaginary entry. A per-UE complex scale then makes each estimate unbiased
with respect to the channel estimate.

All array functions accept leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constellation import Constellation
from .errors import ConfigError, DegenerateEqualizerError, NumericalError
from .frontend import is_ideal, quantize_complex

MAX_EQ_BITS = 6
DEGENERATE_TOL = 1e-12


def inf_tilde_norm(x, axis=-1):
    """max over entries of max(|Re|, |Im|)."""
    x = np.asarray(x)
    return np.maximum(np.abs(x.real).max(axis=axis), np.abs(x.imag).max(axis=axis))


def lmmse_matrix(H_est, rho: float) -> np.ndarray:
    """(H^H H + rho I)^-1 H^H via a solve of the U x U regularized Gram matrix."""
    if rho < 0:
        raise ConfigError(f"rho = N0/Es must be non-negative, got {rho}")
    H_est = np.asarray(H_est, dtype=complex)
    Hh = np.conj(np.swapaxes(H_est, -1, -2))
    U = H_est.shape[-1]
    gram = Hh @ H_est + rho * np.eye(U)
    try:
        W_H = np.linalg.solve(gram, Hh)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular regularized Gram matrix (rho={rho})") from exc
    if not np.all(np.isfinite(W_H)):
        raise NumericalError(f"non-finite L-MMSE matrix (rho={rho})")
    return W_H


def row_steps(W_H, k) -> np.ndarray:
    return inf_tilde_norm(W_H) * 2.0 ** (1 - k)


def flmmse_quantize(W_H, k) -> np.ndarray:
    """Row-wise k-bit quantization of the L-MMSE matrix.

    Any k >= 1 is accepted here; run configurations restrict k to
    1..MAX_EQ_BITS, the range covered by the power model fit.
    """
    W_H = np.asarray(W_H, dtype=complex)
    if is_ideal(k):
        return W_H.copy()
    if int(k) != k or k < 1:
        raise ConfigError(f"equalizer bits must be a positive integer or inf, got {k}")
    delta = row_steps(W_H, k)
    zero = delta == 0
    if np.any(zero):
        raise DegenerateEqualizerError("all-zero equalizer row", rows=np.argwhere(zero).tolist())
    return quantize_complex(W_H, int(k), delta[..., None])


def unbiased_scaling(X_H, H_est, strict: bool = True):
    """mu_u = 1 / (x_u^H h_u).

    With ``strict=False`` degenerate entries come back as NaN together with a
    boolean mask instead of raising.
    """
    gains = np.sum(np.asarray(X_H) * np.swapaxes(np.asarray(H_est), -1, -2), axis=-1)
    bad = np.abs(gains) < DEGENERATE_TOL
    if strict:
        if np.any(bad):
            raise DegenerateEqualizerError(
                "vanishing x_u^H h_u; this (k, channel) pair cannot be unbiased",
                rows=np.argwhere(bad).tolist(),
            )
        return 1.0 / gains
    mu = np.where(bad, np.nan, 1.0 / np.where(bad, 1.0, gains))
    return mu, bad


@dataclass(frozen=True, eq=False)
class EqualizerBundle:
    W_H: np.ndarray
    X_H: np.ndarray
    mu: np.ndarray
    k: float

    @property
    def V_H(self) -> np.ndarray:
        return self.mu[..., :, None] * self.X_H

    def to_csv(self, path) -> None:
        from .channel import save_matrix_csv

        save_matrix_csv(path, self.V_H)


def build_equalizer(H_est, rho: float, k) -> EqualizerBundle:
    W_H = lmmse_matrix(H_est, rho)
    X_H = flmmse_quantize(W_H, k)
    mu = unbiased_scaling(X_H, H_est)
    for arr in (W_H, X_H, mu):
        arr.flags.writeable = False
    return EqualizerBundle(W_H, X_H, mu, k)


def equalize(bundle: EqualizerBundle, z) -> np.ndarray:
    """s_hat_u = mu_u x_u^H z; ``z`` may hold several receive vectors as columns."""
    z = np.asarray(z, dtype=complex)
    prod = bundle.X_H @ z
    if z.ndim == bundle.X_H.ndim - 1:
        return bundle.mu * prod
    return bundle.mu[..., None] * prod


def detect(s_hat, constellation: Constellation, tx_scale):
    """Nearest-neighbour labels and their Gray bits for estimates ``s_hat``
    (UEs along the first axis, or the only axis)."""
    s_hat = np.asarray(s_hat, dtype=complex)
    tx_scale = np.asarray(tx_scale, dtype=float)
    if s_hat.ndim > tx_scale.ndim:
        tx_scale = tx_scale.reshape(tx_scale.shape + (1,) * (s_hat.ndim - tx_scale.ndim))
    labels = constellation.detect(s_hat / tx_scale)
    return labels, constellation.bit_map()[labels]


def quantization_error_bound(W_H, k) -> np.ndarray:
    """Per-row bound on |Re/Im (X - W)|, half the row step."""
    return inf_tilde_norm(W_H) * 2.0 ** (-k)


def rho_from(Es: float, N0: float) -> float:
    if not Es > 0:
        raise ConfigError(f"Es must be positive, got {Es}")
    return N0 / Es

