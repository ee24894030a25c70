"""Scale-of-sparseness time series and power-law regression.

For each snapshot: ``|omega|_inf``, the diffusion scale
``d = sqrt(nu / |omega|_inf)`` and the scale of sparseness ``r``, the
largest sphere inscribed in any RIV of the six component super-level sets.
``log r`` is then regressed on ``log d``.
"""

import csv
import logging
import math
import re
import warnings
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .field import max_norm, pointwise_max_norm
from .geometry import max_radius_over_rivs, voxel_distance_oracle
from .levelsets import COMPONENT_NAMES, component_parts, connected_components
from .snapshot import FieldSnapshot, read_snapshot

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "omega_max", "d", "r", "lambda")
ACF_THRESHOLD = 0.2


class SeriesFormatError(ValueError):
    """Malformed time-series file; ``errors`` lists ``(line, message)``."""

    def __init__(self, errors):
        self.errors = list(errors)
        text = "; ".join(f"line {ln}: {msg}" for ln, msg in self.errors)
        super().__init__(f"malformed series: {text}")


@dataclass(frozen=True)
class SparsenessRecord:
    t: float
    omega_max: float
    d: float
    r: float
    lambda_used: float
    r_oracle: float | None = None

    def is_valid(self):
        return self.omega_max > 0 and self.d > 0 and self.r > 0


@dataclass(frozen=True)
class RegressionResult:
    """OLS fit of ``log r = slope * log d + intercept`` (natural logs).

    ``intercept_log10`` is the same line expressed with base-10 logs; the
    slope does not depend on the base.
    """

    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    n_points: int
    r_squared: float

    @property
    def intercept_log10(self):
        return self.intercept / math.log(10.0)

    @property
    def intercept_log10_stderr(self):
        return self.intercept_stderr / math.log(10.0)

    def predict_log(self, log_d):
        return self.slope * np.asarray(log_d) + self.intercept

    def summary(self):
        return (f"fit = {format_uncertainty(self.slope, self.slope_stderr)} * log(d) + "
                f"{format_uncertainty(self.intercept, self.intercept_stderr)}")

    def to_dict(self):
        out = asdict(self)
        out.update(
            log_base="e",
            intercept_log10=self.intercept_log10,
            intercept_log10_stderr=self.intercept_log10_stderr,
            summary=self.summary(),
        )
        return out


def diffusion_scale(nu, omega_max):
    """``sqrt(nu / omega_max)``."""
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu!r}")
    if omega_max == 0:
        raise ValueError("degenerate: quiescent field (omega_max = 0)")
    if not omega_max > 0:
        raise ValueError(f"omega_max must be positive, got {omega_max!r}")
    return math.sqrt(nu / omega_max)


def loglog_regression(records=None, d=None, r=None):
    """Ordinary least squares of ``log r`` against ``log d``.

    Pass either ``records`` (anything with ``d`` and ``r`` attributes) or the
    arrays ``d`` and ``r``. Standard errors use the residual variance with
    ``n - 2`` degrees of freedom.
    """
    if records is not None:
        d = np.array([rec.d for rec in records], dtype=np.float64)
        r = np.array([rec.r for rec in records], dtype=np.float64)
    d = np.asarray(d, dtype=np.float64).ravel()
    r = np.asarray(r, dtype=np.float64).ravel()
    if d.shape != r.shape:
        raise ValueError("d and r must have the same length")
    ok = np.isfinite(d) & np.isfinite(r) & (d > 0) & (r > 0)
    d, r = d[ok], r[ok]
    n = d.size
    if n < 3:
        raise ValueError(f"need at least 3 valid records, got {n}")
    x, y = np.log(d), np.log(r)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise ValueError("degenerate abscissa: log d has zero variance")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    ssr = float(np.sum(resid**2))
    sst = float(np.sum((y - ym) ** 2))
    s2 = ssr / (n - 2)
    return RegressionResult(
        slope=slope,
        intercept=intercept,
        slope_stderr=math.sqrt(s2 / sxx),
        intercept_stderr=math.sqrt(s2 * (1.0 / n + xm * xm / sxx)),
        n_points=int(n),
        r_squared=1.0 if sst == 0.0 else 1.0 - ssr / sst,
    )


# --- cyclic component filtering ---------------------------------------------

@dataclass
class CyclicFilterResult:
    values: np.ndarray
    period: int | None
    acf_peak: float
    detected: bool
    seasonal: np.ndarray | None = None

    @property
    def flag(self):
        return "filtered" if self.detected else "no cyclic component detected"


def _detrend(values):
    n = values.size
    idx = np.arange(n, dtype=np.float64)
    coef = np.polyfit(idx, values, 1)
    return values - np.polyval(coef, idx)


def autocorrelation(values, max_lag):
    x = _detrend(np.asarray(values, dtype=np.float64))
    var = float(np.dot(x, x))
    if var <= 1e-300 * max(1, x.size):
        return np.zeros(max_lag + 1)
    acf = np.empty(max_lag + 1)
    for k in range(max_lag + 1):
        acf[k] = np.dot(x[: x.size - k], x[k:]) / var
    return acf


def dominant_period(values):
    """Lag of the highest autocorrelation peak in ``[2, n/2]``.

    The series is linearly detrended first. A peak is a lag whose value is at
    least its left neighbor and above its right neighbor. Returns
    ``(period, peak_value)``; ``period`` is None when no peak exists.
    """
    n = len(values)
    max_lag = n // 2
    acf = autocorrelation(values, max_lag + 1)
    best, best_val = None, -np.inf
    for k in range(2, max_lag + 1):
        if acf[k] >= acf[k - 1] and acf[k] > acf[k + 1] and acf[k] > best_val:
            best, best_val = k, float(acf[k])
    return best, (best_val if best is not None else 0.0)


def centered_moving_average(values, period):
    """Centered moving average spanning one period (2xP form for even P).

    Returns an array with NaN within half a period of either edge.
    """
    values = np.asarray(values, dtype=np.float64)
    if period % 2:
        weights = np.full(period, 1.0 / period)
    else:
        weights = np.full(period + 1, 1.0 / period)
        weights[0] = weights[-1] = 0.5 / period
    half = len(weights) // 2
    out = np.full(values.shape, np.nan)
    if values.size >= len(weights):
        out[half: values.size - half] = np.convolve(values, weights, mode="valid")
    return out


def seasonal_component(values, period):
    """Mean per phase of ``values - moving average``, centered to zero mean."""
    values = np.asarray(values, dtype=np.float64)
    trend = centered_moving_average(values, period)
    detr = values - trend
    phase = np.arange(values.size) % period
    seasonal = np.zeros(period)
    for p in range(period):
        sel = (phase == p) & np.isfinite(detr)
        if sel.any():
            seasonal[p] = detr[sel].mean()
    return seasonal - seasonal.mean()


def _check_uniform(times, n):
    if times is None:
        return
    times = np.asarray(times, dtype=np.float64)
    if times.size != n:
        raise ValueError("times and values differ in length")
    steps = np.diff(times)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
        raise ValueError("filter_cyclic needs uniformly spaced, increasing times")


def filter_cyclic(values, times=None, period=None, threshold=ACF_THRESHOLD):
    """Remove the dominant periodic component of a uniformly sampled series.

    The period is the highest detrended autocorrelation peak (see
    :func:`dominant_period`) unless given. The phase-averaged deviation from a
    one-period centered moving average is subtracted, leaving trend plus
    residual. If no peak exceeds ``threshold`` the input comes back unchanged
    with ``detected=False``.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size < 8:
        raise ValueError("filter_cyclic needs a 1-D series of at least 8 samples")
    if not np.all(np.isfinite(values)):
        raise ValueError("series contains non-finite values")
    _check_uniform(times, values.size)
    if period is None:
        period, peak = dominant_period(values)
        if period is None or peak <= threshold:
            return CyclicFilterResult(values.copy(), None, peak, False)
    else:
        period = int(period)
        if not 2 <= period <= values.size // 2:
            raise ValueError(f"period must lie in [2, {values.size // 2}], got {period}")
        acf = autocorrelation(values, period)
        peak = float(acf[period])
    seasonal = seasonal_component(values, period)
    filtered = values - seasonal[np.arange(values.size) % period]
    return CyclicFilterResult(filtered, period, peak, True, seasonal)


def filter_records(records, columns=("r",), period=None, threshold=ACF_THRESHOLD):
    """Apply :func:`filter_cyclic` to ``log`` of the chosen record columns.

    Returns ``(new_records, {column: CyclicFilterResult})``. Only ``d`` and
    ``r`` can be filtered; ``d`` is not recomputed from ``omega_max``.
    """
    records = list(records)
    times = np.array([rec.t for rec in records])
    out = {}
    new = {c: None for c in columns}
    for col in columns:
        if col not in ("d", "r"):
            raise ValueError(f"cannot filter column {col!r}")
        logs = np.log([getattr(rec, col) for rec in records])
        res = filter_cyclic(logs, times, period, threshold)
        out[col] = res
        new[col] = np.exp(res.values)
    filtered = []
    for i, rec in enumerate(records):
        changes = {c: float(new[c][i]) for c in columns}
        filtered.append(replace(rec, **changes))
    return filtered, out


# --- uncertainty notation ---------------------------------------------------

_UNC = re.compile(r"^\s*([-+]?\d+(?:\.(\d+))?)\((\d+(?:\.\d+)?)\)\s*$")


def parse_uncertainty(text):
    """``"1.098(9)" -> (1.098, 0.009)``; ``"6.1(1.6)" -> (6.1, 1.6)``."""
    m = _UNC.match(text)
    if not m:
        raise ValueError(f"not in value(uncertainty) notation: {text!r}")
    value, decimals, unc = m.group(1), m.group(2) or "", m.group(3)
    if "." in unc:
        return float(value), float(unc)
    return float(value), float(f"{unc}e-{len(decimals)}")


def format_uncertainty(value, stderr):
    """Format as ``value(uncertainty)`` in the last places, e.g. ``1.098(9)``.

    The uncertainty keeps one significant digit, or two when its leading
    digit is 1; an uncertainty reaching past the decimal point is written
    out in full, e.g. ``6.1(1.6)``.
    """
    if not np.isfinite(stderr) or stderr <= 0:
        return f"{value!r}(0)"
    lead = math.floor(math.log10(stderr))
    digits = 2 if stderr / 10.0**lead < 2 else 1
    exp = lead - (digits - 1)
    unc = round(stderr / 10.0**exp)
    if unc >= 10**digits:
        exp += 1
        unc = round(stderr / 10.0**exp)
    if exp >= 0:
        scaled = round(value / 10.0**exp) * 10**exp
        return f"{scaled:.0f}({unc * 10 ** exp})"
    decimals = -exp
    if unc * 10.0**exp >= 1:
        return f"{value:.{decimals}f}({unc * 10.0 ** exp:.{decimals}f})"
    return f"{value:.{decimals}f}({unc})"


# --- series I/O ---------------------------------------------------------------

def write_series_csv(records, path=None):
    """Write records with header ``t,omega_max,d,r,lambda`` (plus ``r_oracle``
    when any record has one). Floats use shortest round-trip repr."""
    records = list(records)
    with_oracle = any(rec.r_oracle is not None for rec in records)
    header = list(CSV_COLUMNS) + (["r_oracle"] if with_oracle else [])
    lines = [",".join(header)]
    for rec in records:
        row = [rec.t, rec.omega_max, rec.d, rec.r, rec.lambda_used]
        if with_oracle:
            row.append(rec.r_oracle if rec.r_oracle is not None else float("nan"))
        lines.append(",".join(repr(float(v)) for v in row))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def ingest_external_series(path):
    """Read a ``t,omega_max,d,r,lambda`` CSV into validated records.

    Unparseable rows raise :class:`SeriesFormatError` listing every bad line;
    rows with non-positive ``d`` or ``r`` are dropped with a warning.
    """
    text = Path(path).read_text()
    reader = csv.reader(text.splitlines())
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SeriesFormatError([(1, "empty file")]) from None
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise SeriesFormatError([(1, f"header lacks column(s) {', '.join(missing)}")])
    pos = {c: header.index(c) for c in header}
    records, errors = [], []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            errors.append((line_no, f"expected {len(header)} fields, got {len(row)}"))
            continue
        try:
            vals = {c: float(row[pos[c]]) for c in header}
        except ValueError as exc:
            errors.append((line_no, str(exc)))
            continue
        if not all(np.isfinite(vals[c]) for c in CSV_COLUMNS):
            errors.append((line_no, "non-finite value"))
            continue
        if vals["d"] <= 0 or vals["r"] <= 0:
            warnings.warn(f"{path}: line {line_no}: non-positive d or r, row dropped",
                          stacklevel=2)
            continue
        oracle = vals.get("r_oracle")
        records.append(SparsenessRecord(
            t=vals["t"], omega_max=vals["omega_max"], d=vals["d"], r=vals["r"],
            lambda_used=vals["lambda"],
            r_oracle=oracle if oracle is not None and np.isfinite(oracle) else None,
        ))
    if errors:
        raise SeriesFormatError(errors)
    return records


def plot_rows(records, result):
    """``(log d, log r, fitted log r)`` triples for external plotting."""
    rows = []
    for rec in records:
        x, y = math.log(rec.d), math.log(rec.r)
        rows.append((x, y, float(result.predict_log(x))))
    return rows


def write_plot_csv(records, result, path=None):
    lines = ["log_d,log_r,fit_log_r"]
    lines += [",".join(repr(v) for v in row) for row in plot_rows(records, result)]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


# --- time series assembly ---------------------------------------------------

def default_window(times, omega_max):
    """``(t_a, t_b)`` leading up to the burst peak of ``omega_max``.

    An initial decay (the slump before the burst) is skipped: the peak
    ``t_b`` is the maximum after the first local minimum. ``t_a`` is the last
    earlier time where ``omega_max`` is at most half the peak; if it never
    drops that low, the time of the minimum before the peak.
    """
    times = np.asarray(times, dtype=np.float64)
    w = np.asarray(omega_max, dtype=np.float64)
    if w.size < 2 or w.shape != times.shape:
        raise ValueError("need matching times and omega_max with at least 2 samples")
    rising = np.nonzero(np.diff(w) > 0)[0]
    if rising.size == 0:
        raise ValueError("omega_max never increases: no burst to window")
    first_min = int(rising[0])
    peak = first_min + int(np.argmax(w[first_min:]))
    seg = w[first_min: peak + 1]
    below = np.nonzero(seg <= 0.5 * w[peak])[0]
    start = first_min + (int(below[-1]) if below.size else int(np.argmin(seg)))
    return float(times[start]), float(times[peak])


SET_KINDS = ("components", "magnitude")


def _superlevel_fields(omega, sets):
    if sets == "components":
        return dict(zip(COMPONENT_NAMES, component_parts(omega)))
    if sets == "magnitude":
        # by the union property this mask is the union of the six component masks
        return {"magnitude": pointwise_max_norm(omega)}
    raise ValueError(f"sets must be one of {', '.join(SET_KINDS)}, got {sets!r}")


def measure_snapshot(snapshot, lam=0.5, connectivity=26, oracle=False, prune=True,
                     sets="components", **geometry):
    """One :class:`SparsenessRecord` from a snapshot, or None if the
    super-level sets are empty at ``lam * |omega|_inf``.

    ``sets="components"`` takes RIVs from the six component sets
    ``omega_i^+-``; ``sets="magnitude"`` from the max-norm magnitude set.
    """
    if not isinstance(snapshot, FieldSnapshot):
        snapshot = read_snapshot(snapshot)
    grid = snapshot.grid
    omega = snapshot.vorticity
    candidates = _superlevel_fields(omega, sets)
    wmax = max_norm(omega)
    cut = lam * wmax
    rivs, fields = [], {}
    if wmax > 0:
        for name, part in candidates.items():
            mask = part > cut
            if mask.any():
                rivs.extend(connected_components(mask, connectivity, name, cut))
                fields[name] = part
    if not rivs:
        warnings.warn(f"t={snapshot.time:g}: empty super-level sets at lambda={lam}, "
                      "record dropped", stacklevel=2)
        return None
    d = diffusion_scale(snapshot.nu, wmax)
    best = max_radius_over_rivs(rivs, fields, grid, prune=prune, **geometry)
    r_oracle = None
    if oracle:
        r_oracle = max(float(voxel_distance_oracle(part > cut, grid).max())
                       for part in fields.values())
    logger.info("t=%g |omega|=%.6g d=%.6g r=%.6g rivs=%d evaluated=%d",
                snapshot.time, wmax, d, best.radius, len(rivs), best.evaluated)
    return SparsenessRecord(float(snapshot.time), wmax, d, float(best.radius), float(lam),
                            r_oracle)


def assemble_timeseries(snapshots, lam=0.5, window=None, connectivity=26, oracle=False,
                        sets="components", **geometry):
    """Records for every snapshot with time inside ``window`` (inclusive).

    ``snapshots`` may be :class:`FieldSnapshot` objects or header paths; paths
    are loaded one at a time. ``window=None`` keeps all times.
    """
    if not 0 < lam < 1:
        raise ValueError(f"lambda must lie in (0, 1), got {lam!r}")
    if sets not in SET_KINDS:
        raise ValueError(f"sets must be one of {', '.join(SET_KINDS)}, got {sets!r}")
    records = []
    for snap in snapshots:
        if not isinstance(snap, FieldSnapshot):
            snap = read_snapshot(snap)
        if window is not None and not window[0] <= snap.time <= window[1]:
            continue
        rec = measure_snapshot(snap, lam, connectivity, oracle, sets=sets, **geometry)
        if rec is not None:
            records.append(rec)
    return records
