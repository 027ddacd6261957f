"""
Spectral analysis of concurrence traces.

A noiseless trace is a DC level plus six cosines whose frequencies are fixed
linear combinations of the canonical coefficients and whose amplitudes are
``2 |l_i|^2 |l_j|^2``. Heights are reported on the ``p_ij = |l_i|^4 |l_j|^4``
scale throughout, i.e. ``(amplitude / 2) ** 2``.

The pipeline is:

1. :func:`periodogram` -- rectangular-window power spectrum, calibrated so an
   on-bin cosine of amplitude ``A`` shows up with height ``(A/2)**2``.
2. :func:`refine_peaks` -- iterative prewhitening: pick the strongest residual
   line, then jointly re-fit every line found so far against the raw samples
   by Gauss-Newton.
3. :func:`assign_peaks` / :func:`class_from_peaks` -- label the six lines and
   solve for ``[c1, c2, c3]``.
4. :func:`fit_canonical_model` -- re-fit all traces at once with frequencies
   tied to a shared ``[c1, c2, c3]``, which separates lines closer than one
   Fourier bin.
5. :func:`moduli_from_heights` -- Bell-coefficient moduli from the heights.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AssignmentError,
    CorruptHeightsError,
    DegenerateHeightsError,
    InconsistentPeaksError,
    InsufficientPeaksError,
    InvalidInputError,
)
from .expsim import ConcurrenceTrace
from .model import FREQUENCY_MATRIX, PAIR_LABELS, PAIRS, CanonicalClass

ZERO_HEIGHT_RATIO = 1e-6  # noisy traces: heights below this fraction of the tallest are zero
ZERO_SIGMA = 10.0        # a line is "zero" unless its amplitude is this many standard errors
ZERO_FLOOR_RATIO = 1e-20  # numerical floor relative to the tallest line
PEAK_FLOOR_RATIO = 1e-6
GN_MAX_ITER = 50
GN_PARAM_TOL = 1e-10


@dataclass
class PowerSpectrum:
    frequencies: np.ndarray
    power: np.ndarray
    dt: float
    n: int
    normalization: str = "p_ij"

    @property
    def resolution(self) -> float:
        return 2.0 * math.pi / (self.n * self.dt)


@dataclass
class PeakSet:
    """Six labelled lines (keys ``'12' .. '34'``) plus the DC coefficient."""

    frequencies: dict
    heights: dict
    dc_height: float = 0.0
    state_id: str = ""
    resolution: float = 0.0

    def frequency_vector(self) -> np.ndarray:
        return np.array([self.frequencies[k] for k in PAIR_LABELS])

    def height_vector(self) -> np.ndarray:
        return np.array([self.heights[k] for k in PAIR_LABELS])


@dataclass
class BellModuli:
    l_abs: np.ndarray
    state_id: str = ""
    spread: float = 0.0
    raw_norm: float = 1.0

    @property
    def squares(self) -> np.ndarray:
        return np.asarray(self.l_abs) ** 2


def frequency_resolution(trace: ConcurrenceTrace) -> float:
    return 2.0 * math.pi / (trace.n * trace.dt)


def _check_uniform(trace: ConcurrenceTrace):
    n = trace.n
    if n < 2 or n & (n - 1):
        raise InvalidInputError(f"trace length must be a power of two, got {n}")
    steps = np.diff(trace.times)
    if np.any(np.abs(steps - trace.dt) > 1e-9 * max(trace.dt, 1.0)):
        raise InvalidInputError("trace is not on a uniform grid")


def periodogram(trace: ConcurrenceTrace) -> PowerSpectrum:
    _check_uniform(trace)
    n = trace.n
    spec = np.fft.rfft(trace.values) / n
    power = np.abs(spec) ** 2
    # DC bin stays |mean|^2; the other bins fold the negative-frequency half in
    omega = 2.0 * math.pi * np.fft.rfftfreq(n, trace.dt)
    return PowerSpectrum(omega, power, trace.dt, n)


def write_spectrum(spectrum: PowerSpectrum, path) -> Path:
    path = Path(path)
    lines = [f"# dt={spectrum.dt!r} n={spectrum.n}"]
    lines += [f"{w:.17g},{p:.17g}" for w, p in zip(spectrum.frequencies, spectrum.power)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_spectrum(path) -> PowerSpectrum:
    with Path(path).open(encoding="utf-8") as fh:
        header = fh.readline()
        parts = dict(kv.split("=", 1) for kv in header.lstrip("#").split())
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return PowerSpectrum(data[:, 0], data[:, 1], float(parts["dt"]), int(parts["n"]))


# --- sum-of-cosines model -------------------------------------------------------


def _design(times, freqs) -> np.ndarray:
    arg = np.outer(times, freqs)
    cols = [np.ones_like(times)]
    for k in range(len(freqs)):
        cols.append(np.cos(arg[:, k]))
        cols.append(np.sin(arg[:, k]))
    return np.column_stack(cols)


def _linear_fit(times, values, freqs):
    basis = _design(times, freqs)
    coef, *_ = np.linalg.lstsq(basis, values, rcond=None)
    return coef, values - basis @ coef


def _heights_from_coef(coef) -> np.ndarray:
    a, b = coef[1::2], coef[2::2]
    return 0.25 * (a * a + b * b)


def gauss_newton_tones(times, values, freqs, max_iter=GN_MAX_ITER, tol=GN_PARAM_TOL):
    """Least-squares fit of ``dc + sum_k a_k cos(w_k t) + b_k sin(w_k t)``.

    Frequencies are refined by damped Gauss-Newton starting from ``freqs``.
    Returns ``(freqs, coef, residual)`` with ``coef = [dc, a_1, b_1, ...]``.
    """
    freqs = np.array(freqs, dtype=float)
    coef, resid = _linear_fit(times, values, freqs)
    cost = resid @ resid
    for _ in range(max_iter):
        a, b = coef[1::2], coef[2::2]
        arg = np.outer(times, freqs)
        c, s = np.cos(arg), np.sin(arg)
        jac_w = times[:, None] * (-a * s + b * c)
        basis = _design(times, freqs)
        jac = np.column_stack([basis, jac_w])
        step, *_ = np.linalg.lstsq(jac, resid, rcond=None)
        dw = step[len(coef):]
        accepted = False
        for damp in (1.0, 0.5, 0.25, 0.125, 0.0625):
            trial = freqs + damp * dw
            tcoef, tres = _linear_fit(times, values, trial)
            tcost = tres @ tres
            if tcost <= cost:
                accepted = True
                break
        if not accepted:
            break
        freqs, coef, resid, cost = trial, tcoef, tres, tcost
        if np.max(np.abs(damp * dw)) < tol:
            break
    return freqs, coef, resid


def extract_tones(trace: ConcurrenceTrace, max_count: int, floor_ratio=PEAK_FLOOR_RATIO):
    """Iterative prewhitening. Returns ``(freqs, heights, coef)`` sorted by frequency."""
    _check_uniform(trace)
    times, values = trace.times, trace.values
    n = trace.n
    omega = 2.0 * math.pi * np.fft.rfftfreq(n, trace.dt)
    freqs = np.zeros(0)
    coef, resid = _linear_fit(times, values, freqs)
    ref = None
    while len(freqs) < max_count:
        power = np.abs(np.fft.rfft(resid) / n) ** 2
        power[0] = 0.0
        k = int(np.argmax(power[1:-1])) + 1
        if ref is None:
            ref = power[k]
            if ref <= 0:
                break
        elif power[k] < floor_ratio * ref:
            break
        # parabolic interpolation of the log-power around the bin
        lo, mid, hi = np.log(power[k - 1] + 1e-300), np.log(power[k] + 1e-300), np.log(power[k + 1] + 1e-300)
        den = lo - 2 * mid + hi
        shift = 0.5 * (lo - hi) / den if den < 0 else 0.0
        guess = omega[k] + np.clip(shift, -0.5, 0.5) * (omega[1] - omega[0])
        new_freqs, new_coef, new_resid = gauss_newton_tones(times, values, np.append(freqs, guess))
        if len(new_freqs) > 1 and np.min(np.diff(np.sort(new_freqs))) < 1e-3 * (omega[1] - omega[0]):
            break  # refit collapsed two lines onto one
        freqs, coef, resid = new_freqs, new_coef, new_resid
        ref = max(ref, _heights_from_coef(coef).max())
    heights = _heights_from_coef(coef)
    order = np.argsort(freqs)
    keep = np.concatenate([[0], np.ravel(np.column_stack([1 + 2 * order, 2 + 2 * order]))]).astype(int)
    return freqs[order], heights[order], coef[keep]


def refine_peaks(spectrum: PowerSpectrum, trace: ConcurrenceTrace, count: int,
                 floor_ratio=PEAK_FLOOR_RATIO):
    """Locate and refine ``count`` spectral lines; returns ``[(omega, height), ...]``.

    ``spectrum`` must be the periodogram of ``trace``; the line search itself
    runs on prewhitened residuals of the same samples.
    """
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    if spectrum.n != trace.n or spectrum.dt != trace.dt:
        raise InvalidInputError("spectrum does not belong to this trace")
    freqs, heights, _ = extract_tones(trace, count, floor_ratio)
    found = [(float(w), float(h)) for w, h in zip(freqs, heights)]
    if len(found) < count:
        raise InsufficientPeaksError(f"found {len(found)} of {count} peaks", found)
    return found


# --- labelling ------------------------------------------------------------------


def _solve_class(freqs, rows, weights=None):
    m = FREQUENCY_MATRIX[list(rows)]
    w = np.ones(len(rows)) if weights is None else np.asarray(weights)
    sol, *_ = np.linalg.lstsq(m * w[:, None], np.asarray(freqs) * w, rcond=None)
    resid = np.abs(m @ sol - freqs).max() if len(rows) else 0.0
    return sol, float(resid)


def _admissible(c, slack) -> bool:
    return c[0] + slack >= c[1] and c[1] + slack >= c[2] and c[2] >= -slack


def best_labeling(freqs, resolution: float):
    """Brute-force the label assignment of 4..6 distinct line frequencies.

    Returns ``(labels, c, residual)`` minimising the worst-case mismatch of
    ``w = FREQUENCY_MATRIX @ c`` among labelings with ``c1 >= c2 >= c3 >= 0``.
    """
    freqs = np.sort(np.asarray(freqs, dtype=float))
    m = len(freqs)
    if not 4 <= m <= 6:
        raise AssignmentError(f"need 4 to 6 lines to label, got {m}")
    best = None
    for rows in itertools.permutations(range(6), m):
        if np.linalg.matrix_rank(FREQUENCY_MATRIX[list(rows)]) < 3:
            continue
        c, resid = _solve_class(freqs, rows)
        if not _admissible(c, resolution):
            continue
        if best is None or resid < best[2] - 1e-15:
            best = (rows, c, resid)
    if best is None:
        raise AssignmentError("no admissible labeling")
    rows, c, resid = best
    return [PAIR_LABELS[r] for r in rows], c, resid


def assign_peaks(raw, resolution: float = 0.0, state_id: str = "") -> PeakSet:
    """Label exactly six ``(omega, height)`` lines as ``w12 .. w34``."""
    raw = sorted((float(w), float(h)) for w, h in raw)
    if len(raw) != 6:
        raise AssignmentError(f"expected 6 non-DC peaks, got {len(raw)}")
    freqs = np.array([w for w, _ in raw])
    labels, _, resid = best_labeling(freqs, resolution)
    if resid > 5.0 * resolution + 1e-12 * max(1.0, freqs.max()):
        raise AssignmentError(f"best labeling leaves residual {resid:.3g}")
    out_f, out_h = {}, {}
    for (w, h), lab in zip(raw, labels):
        out_f[lab] = w
        out_h[lab] = h
    return PeakSet(out_f, out_h, state_id=state_id, resolution=resolution)


def class_from_peaks(peaks: PeakSet, weights=None, tol=None) -> CanonicalClass:
    freqs = peaks.frequency_vector()
    c, _ = _solve_class(freqs, range(6), weights)
    slack = 5.0 * peaks.resolution if tol is None else tol
    if c[2] < -slack:
        raise InconsistentPeaksError(f"negative canonical coefficient {c[2]:.3g}")
    if c[0] + slack < c[1] or c[1] + slack < c[2]:
        raise InconsistentPeaksError(f"coefficients out of order: {c}")
    return CanonicalClass(c=tuple(np.maximum(c, 0.0)))


# --- structured joint fit -------------------------------------------------------


@dataclass
class CanonicalFit:
    cls: CanonicalClass
    peaksets: dict
    rms_residual: dict = field(default_factory=dict)


def fit_canonical_model(traces, c0, max_iter=GN_MAX_ITER, tol=GN_PARAM_TOL,
                        zero_sigma=ZERO_SIGMA, zero_ratio=ZERO_HEIGHT_RATIO) -> CanonicalFit:
    """Jointly fit all traces with line frequencies ``FREQUENCY_MATRIX @ c``.

    Only ``c`` is nonlinear; each trace gets its own DC level and six
    cosine/sine amplitudes. Returns the refined class and one labelled
    :class:`PeakSet` per trace. A height is set to zero when its fitted
    amplitude is below ``zero_sigma`` standard errors, estimated from the
    residual as ``rms * sqrt(2 / n)``; for noisy traces (``shots > 0``) also
    when it is below ``zero_ratio`` times the tallest line.
    """
    traces = list(traces)
    c = np.array(c0, dtype=float)

    def linear(cvec):
        freqs = FREQUENCY_MATRIX @ cvec
        out = []
        for tr in traces:
            coef, resid = _linear_fit(tr.times, tr.values, freqs)
            out.append((coef, resid))
        return out

    fits = linear(c)
    cost = sum(r @ r for _, r in fits)
    for _ in range(max_iter):
        freqs = FREQUENCY_MATRIX @ c
        blocks, rhs = [], []
        nlin = 13
        ncols = 3 + nlin * len(traces)
        for k, (tr, (coef, resid)) in enumerate(zip(traces, fits)):
            t = tr.times
            arg = np.outer(t, freqs)
            a, b = coef[1::2], coef[2::2]
            dmodel_dw = t[:, None] * (-a * np.sin(arg) + b * np.cos(arg))
            jac = np.zeros((len(t), ncols))
            jac[:, :3] = dmodel_dw @ FREQUENCY_MATRIX
            jac[:, 3 + nlin * k: 3 + nlin * (k + 1)] = _design(t, freqs)
            blocks.append(jac)
            rhs.append(resid)
        step, *_ = np.linalg.lstsq(np.vstack(blocks), np.concatenate(rhs), rcond=None)
        dc = step[:3]
        accepted = False
        for damp in (1.0, 0.5, 0.25, 0.125, 0.0625):
            trial = c + damp * dc
            tfits = linear(trial)
            tcost = sum(r @ r for _, r in tfits)
            if tcost <= cost:
                accepted = True
                break
        if not accepted:
            break
        c, fits, cost = trial, tfits, tcost
        if np.max(np.abs(damp * dc)) < tol:
            break

    if not _admissible(c, 1e-9):
        raise InconsistentPeaksError(f"joint fit left the ordered chamber: {c}")
    cls = CanonicalClass(c=tuple(np.maximum(c, 0.0)))
    freqs = FREQUENCY_MATRIX @ c
    peaksets, rms = {}, {}
    for tr, (coef, resid) in zip(traces, fits):
        heights = _heights_from_coef(coef)
        rms_k = math.sqrt(resid @ resid / len(resid))
        sigma_amp = rms_k * math.sqrt(2.0 / len(resid))
        ratio = ZERO_FLOOR_RATIO if tr.noiseless else max(zero_ratio, ZERO_FLOOR_RATIO)
        floor = max((zero_sigma * sigma_amp / 2.0) ** 2, ratio * heights.max())
        heights = np.where(heights < floor, 0.0, heights)
        peaksets[tr.input_state_id] = PeakSet(
            {lab: float(w) for lab, w in zip(PAIR_LABELS, freqs)},
            {lab: float(h) for lab, h in zip(PAIR_LABELS, heights)},
            dc_height=float(coef[0] ** 2),
            state_id=tr.input_state_id,
            resolution=frequency_resolution(tr),
        )
        rms[tr.input_state_id] = float(np.sqrt(resid @ resid / len(resid)))
    return CanonicalFit(cls, peaksets, rms)


# --- Bell moduli ----------------------------------------------------------------

# For each index i: the three (numerator, numerator, denominator) triples giving |l_i|^8.
_RATIO_FORMS = {
    1: (("12", "13", "23"), ("12", "14", "24"), ("14", "13", "34")),
    2: (("12", "23", "13"), ("12", "24", "14"), ("24", "23", "34")),
    3: (("13", "23", "12"), ("13", "34", "14"), ("23", "34", "24")),
    4: (("14", "24", "12"), ("24", "34", "23"), ("14", "34", "13")),
}


def _touching(i):
    return [f"{a}{b}" for a, b in PAIRS if i in (a, b)]


def moduli_from_heights(peaks: PeakSet, state_id: str | None = None,
                        renorm_tol=0.05) -> BellModuli:
    """``|l_i|`` from line heights, averaging the three ratio forms per index."""
    h = dict(peaks.heights)
    if any(v < 0 for v in h.values()):
        raise CorruptHeightsError("negative peak height")
    zero = {k for k, v in h.items() if v == 0.0}
    vanished = [i for i in range(1, 5) if all(k in zero for k in _touching(i))]
    implied = {k for i in vanished for k in _touching(i)}
    if zero != implied:
        raise DegenerateHeightsError(f"zero heights {sorted(zero)} do not single out one index")
    if len(vanished) > 1:
        raise DegenerateHeightsError(f"indices {vanished} all vanish; moduli are ambiguous")
    l_abs = np.zeros(4)
    spread = 0.0
    for i in range(1, 5):
        if i in vanished:
            continue
        estimates = []
        for n1, n2, den in _RATIO_FORMS[i]:
            if h[den] > 0 and h[n1] > 0 and h[n2] > 0:
                estimates.append(math.log(h[n1] * h[n2] / h[den]) / 8.0)
        if not estimates:
            raise DegenerateHeightsError(f"no usable ratio for |l_{i}|")
        l_abs[i - 1] = math.exp(sum(estimates) / len(estimates))
        spread = max(spread, math.exp(max(estimates)) - math.exp(min(estimates)))
    norm = float(np.sum(l_abs**2))
    if abs(norm - 1.0) >= renorm_tol:
        raise CorruptHeightsError(f"moduli sum to {norm:.4f}, not 1")
    l_abs = l_abs / math.sqrt(norm)
    return BellModuli(l_abs, state_id if state_id is not None else peaks.state_id, spread, norm)


# --- whole-trace analysis -------------------------------------------------------


@dataclass
class SpectralResult:
    cls: CanonicalClass
    peaksets: dict
    moduli: dict
    raw_peaks: dict
    spectra: dict
    labeling_trace: str
    rms_residual: dict


def _initial_class(raw_peaks: dict, resolution: float):
    best = None
    for sid, peaks in raw_peaks.items():
        if len(peaks) < 4:
            continue
        labels, c, resid = best_labeling([w for w, _ in peaks], resolution)
        key = (-len(peaks), resid)
        if best is None or key < best[0]:
            best = (key, sid, c, resid)
    if best is None:
        raise InsufficientPeaksError(
            "no trace shows at least four spectral lines",
            [p for peaks in raw_peaks.values() for p in peaks],
        )
    _, sid, c, resid = best
    if resid > 5.0 * resolution:
        raise AssignmentError(f"best labeling leaves residual {resid:.3g}")
    return sid, c


def analyze_traces(traces, floor_ratio=PEAK_FLOOR_RATIO) -> SpectralResult:
    """Canonical class, labelled peaks and Bell moduli for a set of probe traces."""
    traces = list(traces)
    if not traces:
        raise InvalidInputError("no traces supplied")
    resolution = max(frequency_resolution(tr) for tr in traces)
    spectra, raw = {}, {}
    for tr in traces:
        spectra[tr.input_state_id] = spec = periodogram(tr)
        try:
            raw[tr.input_state_id] = refine_peaks(spec, tr, 6, floor_ratio)
        except InsufficientPeaksError as exc:
            raw[tr.input_state_id] = exc.found
    sid, c0 = _initial_class(raw, resolution)
    fit = fit_canonical_model(traces, c0)
    moduli = {k: moduli_from_heights(ps) for k, ps in fit.peaksets.items()}
    return SpectralResult(fit.cls, fit.peaksets, moduli, raw, spectra, sid, fit.rms_residual)
