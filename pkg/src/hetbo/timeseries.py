"""Power-law lightcurve simulation and second-order statistics.

Covers random-phase simulation of series with a prescribed power-law
power spectral density, gap injection onto an observational time grid,
the normalised residual-sum-of-squares fidelity metric, binned structure
functions, pair-averaged coherence/lag spectra, and (broken) power-law
fits to structure functions.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import InvalidInputError

__all__ = [
    "Lightcurve",
    "StructureFunctionResult",
    "simulate_lightcurve",
    "apply_gaps",
    "rss",
    "structure_function",
    "periodogram",
    "coherence_lag",
    "fit_broken_power_law",
]


@dataclass
class Lightcurve:
    """Time series on strictly increasing times (days)."""

    times: np.ndarray
    values: np.ndarray
    errors: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise InvalidInputError("times and values must be equal-length 1-D arrays")
        if np.any(np.diff(self.times) <= 0):
            raise InvalidInputError("times must be strictly increasing")
        if self.errors is not None:
            self.errors = np.asarray(self.errors, dtype=float)
            if self.errors.shape != self.times.shape or np.any(self.errors < 0):
                raise InvalidInputError("errors must match times and be >= 0")

    def __len__(self):
        return self.times.size


@dataclass
class StructureFunctionResult:
    """Binned structure function; only occupied bins are kept."""

    tau: np.ndarray  # bin centres, days
    sf: np.ndarray
    counts: np.ndarray
    stderr: np.ndarray
    resolution: float


def simulate_lightcurve(psd_index, n, dt=1.0, seed=None):
    """Gaussian series of length ``n`` with power spectrum ~ f^-psd_index.

    Random Fourier amplitudes are drawn per frequency, shaped by the
    power law, and inverse-transformed; the simulation runs on the next
    power-of-two length and is truncated. The output is rescaled to zero
    mean and unit variance on a regular grid with spacing ``dt`` (days).
    """
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    if psd_index < 0 or dt <= 0:
        raise InvalidInputError("psd_index must be >= 0 and dt > 0")
    m = 1 << (int(n - 1)).bit_length()  # next power of two >= n
    freq = np.fft.rfftfreq(m, d=dt)
    spectrum = np.zeros_like(freq)
    spectrum[1:] = freq[1:] ** (-psd_index)
    rng = np.random.default_rng(seed)
    re, im = rng.standard_normal((2, freq.size))
    if m % 2 == 0:
        im[-1] = 0.0  # Nyquist coefficient is real
    im[0] = 0.0
    coef = (re + 1j * im) * np.sqrt(0.5 * spectrum)
    values = np.fft.irfft(coef, m)[:n]
    values = (values - values.mean()) / values.std()
    return Lightcurve(times=np.arange(n) * dt, values=values)


def periodogram(lc):
    """(frequency, power) of a regularly sampled lightcurve, f > 0 only."""
    dts = np.diff(lc.times)
    if not np.allclose(dts, dts[0]):
        raise InvalidInputError("periodogram needs a regular time grid")
    freq = np.fft.rfftfreq(len(lc), d=dts[0])
    power = np.abs(np.fft.rfft(lc.values)) ** 2
    return freq[1:], power[1:]


def apply_gaps(lc, keep_times):
    """Subsample a lightcurve at the requested times.

    Each requested time snaps to the nearest grid point, which must lie
    within half a grid spacing; duplicates collapse to one sample.
    """
    keep_times = np.asarray(keep_times, dtype=float).ravel()
    if keep_times.size == 0:
        raise InvalidInputError("keep_times is empty")
    dts = np.diff(lc.times)
    half = dts.min() / 2.0
    pos = np.searchsorted(lc.times, keep_times)
    idx = np.empty(keep_times.size, dtype=int)
    for k, (t, p) in enumerate(zip(keep_times, pos)):
        lo = max(p - 1, 0)
        hi = min(p, len(lc) - 1)
        idx[k] = lo if abs(lc.times[lo] - t) <= abs(lc.times[hi] - t) else hi
        if abs(lc.times[idx[k]] - t) > half + 1e-12:
            raise InvalidInputError(
                f"keep time {t} is {abs(lc.times[idx[k]] - t):.4g} days from the "
                f"nearest grid point, beyond half the grid spacing"
            )
    idx = np.unique(idx)
    return Lightcurve(
        times=lc.times[idx],
        values=lc.values[idx],
        errors=None if lc.errors is None else lc.errors[idx],
    )


def rss(predicted, truth):
    """Mean squared residual (1/N) sum (pred_i - truth_i)^2."""
    predicted = np.asarray(predicted, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if predicted.size != truth.size:
        raise InvalidInputError("length mismatch between predictions and truth")
    return float(np.mean((predicted - truth) ** 2))


def structure_function(lc, delta=5.3, normalise=True, subtract_noise=False):
    """Binned mean squared differences over all ordered time pairs.

    Pair separations tau fall into bins ((i-1)*delta, i*delta] with
    centres (i - 1/2)*delta. ``normalise`` divides by the global
    lightcurve variance; ``subtract_noise`` removes twice the mean noise
    variance from each bin first (needs per-point errors).
    """
    if delta <= 0:
        raise InvalidInputError("delta must be positive")
    n = len(lc)
    if n < 2:
        raise InvalidInputError("need at least two points")
    t, v = lc.times, lc.values
    max_bin = int(np.ceil((t[-1] - t[0]) / delta))
    sums = np.zeros(max_bin + 1)
    sumsq = np.zeros(max_bin + 1)
    counts = np.zeros(max_bin + 1, dtype=int)
    for i in range(n - 1):
        tau = t[i + 1 :] - t[i]
        d2 = (v[i] - v[i + 1 :]) ** 2
        b = np.ceil(tau / delta).astype(int)
        np.add.at(sums, b, d2)
        np.add.at(sumsq, b, d2**2)
        np.add.at(counts, b, 1)
    occupied = np.flatnonzero(counts)
    sf = sums[occupied] / counts[occupied]
    nb = counts[occupied]
    with np.errstate(invalid="ignore", divide="ignore"):
        var_d2 = (sumsq[occupied] / nb - sf**2) * nb / np.maximum(nb - 1, 1)
        stderr = np.where(nb > 1, np.sqrt(np.clip(var_d2, 0, None) / nb), np.nan)
    if subtract_noise:
        if lc.errors is None:
            raise InvalidInputError("noise subtraction needs per-point errors")
        sf = sf - 2.0 * float(np.mean(lc.errors**2))
    if normalise:
        var = float(np.var(v))
        if var == 0:
            raise InvalidInputError("cannot normalise a zero-variance series")
        sf = sf / var
        stderr = stderr / var
    return StructureFunctionResult(
        tau=(occupied - 0.5) * delta,
        sf=sf,
        counts=nb,
        stderr=stderr,
        resolution=float(delta),
    )


def _pair_spectra(pair):
    a, b = pair
    if len(a) != len(b) or not np.array_equal(a.times, b.times):
        raise InvalidInputError("lightcurves within a pair must share one grid")
    dts = np.diff(a.times)
    if not np.allclose(dts, dts[0]):
        raise InvalidInputError("coherence needs a regular time grid")
    A = np.fft.rfft(a.values - a.values.mean())
    B = np.fft.rfft(b.values - b.values.mean())
    freq = np.fft.rfftfreq(len(a), d=dts[0])
    return freq[1:], (A * np.conj(B))[1:], (np.abs(A) ** 2)[1:], (np.abs(B) ** 2)[1:]


def coherence_lag(pairs, n_bins=8):
    """Pair-averaged coherence and lag spectra in log-spaced frequency bins.

    Coherence per bin is |<S_xy>|^2 / (<S_xx><S_yy>) with the averages
    taken over pairs and over the frequencies inside the bin. Lags are the
    pair-averaged phase at each frequency divided by 2*pi*f, then averaged
    within the bin; positive lag means the first series leads. Standard
    errors come from the spread of single-pair estimates.

    Returns a dict of per-bin arrays: freq, coherence, coh_err, lag_days,
    lag_err, counts.
    """
    pairs = list(pairs)
    if len(pairs) < 2:
        raise InvalidInputError("need at least two sample pairs")
    freq0 = None
    Sxy, Sxx, Syy = [], [], []
    for pair in pairs:
        freq, sxy, sxx, syy = _pair_spectra(pair)
        if freq0 is None:
            freq0 = freq
        elif freq.shape != freq0.shape or not np.allclose(freq, freq0):
            raise InvalidInputError("all pairs must share the same frequency grid")
        Sxy.append(sxy)
        Sxx.append(sxx)
        Syy.append(syy)
    Sxy, Sxx, Syy = np.array(Sxy), np.array(Sxx), np.array(Syy)

    edges = np.geomspace(freq0[0], freq0[-1], n_bins + 1)
    edges[0] *= 1 - 1e-12
    edges[-1] *= 1 + 1e-12
    which = np.digitize(freq0, edges) - 1

    mean_xy = Sxy.mean(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        lag_f = np.angle(mean_xy) / (2.0 * np.pi * freq0)
        lag_pf = np.angle(Sxy) / (2.0 * np.pi * freq0)[None, :]

    out = {k: [] for k in ("freq", "coherence", "coh_err", "lag_days", "lag_err", "counts")}
    for b in range(n_bins):
        sel = which == b
        if not np.any(sel):
            continue
        num = np.abs(Sxy[:, sel].mean()) ** 2
        den = Sxx[:, sel].mean() * Syy[:, sel].mean()
        coh = float(num / den)
        # single-pair estimates for the error bars
        per_pair_coh = (
            np.abs(Sxy[:, sel].mean(axis=1)) ** 2
            / (Sxx[:, sel].mean(axis=1) * Syy[:, sel].mean(axis=1))
        )
        per_pair_lag = lag_pf[:, sel].mean(axis=1)
        npairs = len(pairs)
        out["freq"].append(float(freq0[sel].mean()))
        out["coherence"].append(min(coh, 1.0))
        out["coh_err"].append(float(per_pair_coh.std(ddof=1) / np.sqrt(npairs)))
        out["lag_days"].append(float(lag_f[sel].mean()))
        out["lag_err"].append(float(per_pair_lag.std(ddof=1) / np.sqrt(npairs)))
        out["counts"].append(int(sel.sum()))
    return {k: np.asarray(v) for k, v in out.items()}


def _weighted_linear_fit(X, y, w):
    Xw = X * w[:, None]
    beta, *_ = np.linalg.lstsq(Xw, y * w, rcond=None)
    resid = y - X @ beta
    return beta, float(np.sum((w * resid) ** 2))


def fit_broken_power_law(sf_result, weights=None, allow_single=True,
                         min_improvement=0.05):
    """Weighted (broken) power-law fit to a structure function in log-log.

    Searches break points over the occupied bin centres, fitting a
    continuous two-slope line on either side; falls back to a single
    power law when the break improves the weighted residual by less than
    ``min_improvement`` (and ``allow_single`` is set).

    Returns a dict with ``kind`` "broken" ({alpha1, alpha2, tau_char}) or
    "single" ({alpha}), plus the fitted log-amplitude and residual.
    """
    tau, sf = np.asarray(sf_result.tau, float), np.asarray(sf_result.sf, float)
    if tau.size < 4:
        raise InvalidInputError("need at least four occupied bins")
    if np.any(sf <= 0):
        bad = tau[sf <= 0].tolist()
        raise InvalidInputError(
            f"non-positive structure function values at tau={bad}; cannot fit in log space"
        )
    if weights is None:
        w = np.ones_like(sf)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != sf.shape or np.any(w < 0):
            raise InvalidInputError("weights must be non-negative, one per bin")
    x, yv = np.log(tau), np.log(sf)

    X1 = np.column_stack([np.ones_like(x), x])
    (a0, alpha), rss_single = _weighted_linear_fit(X1, yv, w)

    best = None
    for j in range(1, tau.size - 1):
        xb = x[j]
        left = np.minimum(x - xb, 0.0)
        right = np.maximum(x - xb, 0.0)
        if np.count_nonzero(left) < 2 or np.count_nonzero(right) < 2:
            continue
        X2 = np.column_stack([np.ones_like(x), left, right])
        beta, r = _weighted_linear_fit(X2, yv, w)
        if best is None or r < best[0]:
            best = (r, beta, tau[j])

    if best is not None:
        rss_broken, (a_b, a1, a2), tau_char = best
        # residual floor: data any fit matches to machine precision should
        # not promote the extra break parameters
        floor = 1e-12 * float(np.sum((w * yv) ** 2)) + 1e-300
        improvement = (rss_single - rss_broken) / max(rss_single, floor)
        if not (allow_single and improvement < min_improvement):
            return {
                "kind": "broken",
                "alpha1": float(a1),
                "alpha2": float(a2),
                "tau_char": float(tau_char),
                "log_amplitude": float(a_b),
                "rss": rss_broken,
            }
    return {
        "kind": "single",
        "alpha": float(alpha),
        "log_amplitude": float(a0),
        "rss": rss_single,
    }
