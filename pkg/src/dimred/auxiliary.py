"""Integration-by-parts toolkit: ball Green's data, smooth steps, the quasi-1D
interaction, its line Green's solution, and the effective-potential discrepancy.

For a radial source the Dirichlet problem Delta h = w on the ball of radius
eps with h = 0 on the boundary collapses to one-dimensional quadratures by
the shell theorem:

    h'(r) = M(r)/r^2,   M(r) = int_0^r s^2 w(s) ds,
    h(r)  = u(r) - u(eps),   u(r) = -M(r)/r - int_r^R s w(s) ds,

which is what the image-charge double integral evaluates to.  h vanishes
identically outside the ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import DomainError, InsufficientDataError, RegimeError, ResolutionError
from .nls import CondensateState
from .potentials import ScaledInteraction
from .transverse import TransverseMode

BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class RadialFunction:
    radii: np.ndarray
    values: np.ndarray
    mu: float
    eps: float

    def __post_init__(self):
        if self.radii[0] != 0.0:
            raise DomainError("radial grids start at 0")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("radial samples must be finite")


@dataclass(frozen=True)
class LineFunction:
    xs: np.ndarray
    values: np.ndarray

    def evenness_defect(self) -> float:
        v, vr = self.values, self.values[::-1]
        scale = np.max(np.abs(v)) or 1.0
        return float(np.max(np.abs(v - vr)) / scale)

    def l1(self) -> float:
        return float(np.trapezoid(np.abs(self.values), self.xs))

    def l2(self) -> float:
        return float(np.sqrt(np.trapezoid(self.values**2, self.xs)))


def _require_regime(mu: float, eps: float) -> None:
    if mu >= eps:
        raise RegimeError(f"need mu < eps (moderate confinement), got mu={mu}, eps={eps}")


# ---------------------------------------------------------------------------
# h_eps: radial Dirichlet solution on the ball
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BallGreenData:
    """Quadrature-backed radial solution of Delta h = w_scaled, h(eps) = 0."""

    scaled: ScaledInteraction
    eps: float

    def mass(self, r) -> np.ndarray:
        """M(r) = int_0^r s^2 w(s) ds, exact change of variables below the range."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        rng = self.scaled.range
        m_tot = self.scaled.integral(3) / (4.0 * math.pi)
        for i, ri in enumerate(r):
            if ri >= rng:
                out[i] = m_tot
            else:
                val, _ = quad(lambda s: s**2 * float(self.scaled(s)), 0.0, ri,
                              epsabs=1e-14, epsrel=1e-11, limit=200)
                out[i] = val
        return out

    def gradient(self, r) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        inside = (r > 0) & (r <= self.eps)
        out[inside] = self.mass(r[inside]) / r[inside] ** 2
        return out

    def value(self, r) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        rng = self.scaled.range
        m_tot = self.scaled.integral(3) / (4.0 * math.pi)
        u_eps = -m_tot / self.eps

        def u_scalar(ri):
            if ri >= rng:
                return -m_tot / ri if ri > 0 else -m_tot / max(rng, 1e-300)
            tail, _ = quad(lambda s: s * float(self.scaled(s)), ri, rng,
                           epsabs=1e-14, epsrel=1e-11, limit=200)
            if ri == 0.0:
                return -tail
            return -float(self.mass(ri)[0]) / ri - tail

        out = np.zeros_like(r)
        inside = r < self.eps
        out[inside] = np.array([u_scalar(ri) for ri in r[inside]]) - u_eps
        return out

    def sup_gradient(self, n_probe: int = 4096) -> float:
        rng = self.scaled.range
        probes = np.concatenate([
            np.linspace(0.0, rng, n_probe // 2),
            np.geomspace(rng, self.eps, n_probe // 2),
        ])
        return float(np.max(self.gradient(probes)))

    def l2_gradient(self) -> float:
        rng = self.scaled.range
        val1, _ = quad(lambda r: r**2 * float(self.gradient(r)[0]) ** 2, 0.0, rng,
                       epsabs=1e-14, epsrel=1e-10, limit=200)
        m_tot = self.scaled.integral(3) / (4.0 * math.pi)
        # outside the support the gradient is m_tot/r^2, integrable analytically
        val2 = m_tot**2 * (1.0 / rng - 1.0 / self.eps)
        return math.sqrt(4.0 * math.pi * (val1 + val2))


def build_h_epsilon(scaled: ScaledInteraction, eps: float | None = None,
                    n_samples: int = 2048, grid: str = "adaptive") -> RadialFunction:
    """Sampled h_eps.  grid='uniform' produces equispaced radii on [0, eps]
    (what the Poisson verifier needs); 'adaptive' concentrates samples on the
    interaction range before widening toward the boundary."""
    eps = scaled.point.epsilon if eps is None else eps
    _require_regime(scaled.range, eps)
    data = BallGreenData(scaled, eps)
    if grid == "uniform":
        radii = np.linspace(0.0, eps, n_samples)
    elif grid == "adaptive":
        inner = np.linspace(0.0, min(3.0 * scaled.range, eps), (2 * n_samples) // 3)
        outer = np.geomspace(max(inner[-1], 1e-300), eps, n_samples - len(inner) + 1)[1:]
        radii = np.concatenate([inner, outer])
    else:
        raise DomainError(f"unknown grid kind {grid!r}")
    values = data.value(radii)
    if abs(values[-1]) > BOUNDARY_TOL * max(1.0, np.max(np.abs(values))):
        raise ResolutionError(f"boundary value |h(eps)| = {abs(values[-1]):.2e} too large")
    return RadialFunction(radii, values, scaled.range, eps)


@dataclass(frozen=True)
class PoissonReport:
    max_relative_residual: float
    boundary_value: float
    n_samples: int
    excluded_window: float


def verify_poisson(h: RadialFunction, scaled: ScaledInteraction) -> PoissonReport:
    """Second-order radial Laplacian of the samples against the source.

    Residuals are reported relative to sup|w|; nodes straddling the kinks at
    the support edge (where w jumps) and the two endpoints are excluded.
    """
    r, v = h.radii, h.values
    dr = np.diff(r)
    if np.max(np.abs(dr - dr[0])) > 1e-9 * dr[0]:
        raise DomainError("verify_poisson needs a uniform radial grid (grid='uniform')")
    if scaled.range / dr[0] < 16:
        raise ResolutionError("need at least 16 samples across the interaction range")
    step = dr[0]
    lap = np.full_like(v, np.nan)
    lap[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / step**2 \
        + (v[2:] - v[:-2]) / step * (1.0 / r[1:-1])
    w = scaled(r)
    sup_w = float(np.max(np.abs(w))) or 1.0
    window = 3.0 * step
    keep = np.ones(len(r), dtype=bool)
    keep[[0, -1]] = False
    keep &= np.abs(r - scaled.range) > window
    keep &= np.abs(r - h.eps) > window
    res = np.abs(lap[keep] - w[keep]) / sup_w
    return PoissonReport(float(np.max(res)), float(abs(v[-1])), len(r), window)


# ---------------------------------------------------------------------------
# smooth radial step
# ---------------------------------------------------------------------------


def smooth_step(x, lo: float, hi: float) -> np.ndarray:
    """Decreasing C^inf step: 1 at lo, 0 at hi, exponential-ratio profile."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    out[x >= hi] = 0.0
    mid = (x > lo) & (x < hi)
    xm = x[mid]
    a = -(hi - lo) / (hi - xm)
    b = -(hi - lo) / (xm - lo)
    ea, eb = np.exp(a), np.exp(b)
    out[mid] = ea / (ea + eb)
    return out


def smooth_step_derivative(x, lo: float, hi: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    mid = (x > lo) & (x < hi)
    xm = x[mid]
    span = hi - lo
    a = -span / (hi - xm)
    b = -span / (xm - lo)
    da = -span / (hi - xm) ** 2
    db = span / (xm - lo) ** 2
    ea, eb = np.exp(a), np.exp(b)
    out[mid] = (da * ea * eb - ea * eb * db) / (ea + eb) ** 2
    return out


@dataclass(frozen=True)
class ThetaReport:
    sup: float
    l2: float
    grad_sup: float
    grad_l2: float
    midpoint: float
    value_at_mu: float
    value_at_eps: float


def theta(mu: float, eps: float, n_samples: int = 2048) -> tuple[RadialFunction, ThetaReport]:
    """Radial cutoff Theta: 1 inside mu, smooth decrease to 0 at eps; 3-d norms."""
    _require_regime(mu, eps)
    radii = np.linspace(0.0, eps, n_samples)
    vals = smooth_step(radii, mu, eps)
    l2sq, _ = quad(lambda r: 4.0 * math.pi * r**2 * float(smooth_step(np.asarray(r), mu, eps)) ** 2,
                   0.0, eps, epsabs=1e-14, epsrel=1e-10, limit=200)
    g2sq, _ = quad(lambda r: 4.0 * math.pi * r**2
                   * float(smooth_step_derivative(np.asarray(r), mu, eps)) ** 2,
                   mu, eps, epsabs=1e-14, epsrel=1e-10, limit=400)
    probe = np.linspace(mu, eps, 8192)
    grad_sup = float(np.max(np.abs(smooth_step_derivative(probe, mu, eps))))
    rep = ThetaReport(
        sup=1.0,
        l2=math.sqrt(l2sq),
        grad_sup=grad_sup,
        grad_l2=math.sqrt(g2sq),
        midpoint=float(smooth_step(np.asarray((mu + eps) / 2.0), mu, eps)),
        value_at_mu=float(smooth_step(np.asarray(mu), mu, eps)),
        value_at_eps=float(smooth_step(np.asarray(eps), mu, eps)),
    )
    return RadialFunction(radii, vals, mu, eps), rep


# ---------------------------------------------------------------------------
# gradient-scaling regression (ball Green data along a sequence)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    log_constant: float
    r_squared: float


def _loglog_fit(x: np.ndarray, y: np.ndarray) -> ScalingFit:
    spread = (np.max(x) - np.min(x)) / max(abs(float(np.mean(x))), 1e-300)
    if len(x) < 2 or spread < 1e-9:
        raise InsufficientDataError(
            "regression needs at least two distinct predictor values "
            "(predictor spread is degenerate)")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2)) or 1e-300
    return ScalingFit(float(slope), float(intercept), 1.0 - ss_res / ss_tot)


@dataclass(frozen=True)
class GradientScalingReport:
    sup_fit: ScalingFit
    l2_fit: ScalingFit
    sup_values: np.ndarray
    l2_values: np.ndarray
    sup_predictors: np.ndarray
    l2_predictors: np.ndarray


def gradient_scaling_fit(points, profile) -> GradientScalingReport:
    """Regress measured sup/L2 norms of grad h_eps against N^-1 mu^-2 eps^2 and
    N^-1 mu^-1/2 eps^2 along a scaling sequence (expected slopes: 1)."""
    from .potentials import scale

    pts = list(points)
    if len(pts) < 4:
        raise InsufficientDataError(f"need >= 4 scaling points, got {len(pts)}")
    sup_vals, l2_vals, sup_pred, l2_pred = [], [], [], []
    for p in pts:
        sc = scale(profile, p)
        _require_regime(sc.range, p.epsilon)
        data = BallGreenData(sc, p.epsilon)
        sup_vals.append(data.sup_gradient())
        l2_vals.append(data.l2_gradient())
        sup_pred.append(p.epsilon**2 / (p.n_particles * p.mu**2))
        l2_pred.append(p.epsilon**2 / (p.n_particles * math.sqrt(p.mu)))
    sup_pred, l2_pred = np.asarray(sup_pred), np.asarray(l2_pred)
    return GradientScalingReport(
        sup_fit=_loglog_fit(sup_pred, np.asarray(sup_vals)),
        l2_fit=_loglog_fit(l2_pred, np.asarray(l2_vals)),
        sup_values=np.asarray(sup_vals), l2_values=np.asarray(l2_vals),
        sup_predictors=sup_pred, l2_predictors=l2_pred,
    )


# ---------------------------------------------------------------------------
# quasi one-dimensional interaction and its line Green's solution
# ---------------------------------------------------------------------------


def _transverse_density_correlation(tmode: TransverseMode):
    """T(u) = int |chi^eps(y)|^2 |chi^eps(y - u)|^2 dy as a callable of |u|.

    Cubic splines keep the interpolation error far below the mu^2-scale
    signals this enters; the result is even in u by construction.
    """
    if tmode.dimension == 1:
        dens = np.abs(tmode.chi) ** 2
        spline = CubicSpline(tmode.axis, dens, extrapolate=False)

        def corr(u):
            u = np.atleast_1d(np.asarray(u, dtype=float))
            out = np.empty_like(u)
            for i, ui in enumerate(u):
                shifted = spline(tmode.axis - ui)
                shifted = np.nan_to_num(shifted, nan=0.0)
                out[i] = np.trapezoid(dens * shifted, tmode.axis)
            return out

        return corr
    dens = np.abs(tmode.chi) ** 2
    n = len(tmode.axis)
    f = np.fft.fft2(dens)
    corr_grid = np.fft.ifft2(f * np.conj(f)).real * tmode.weight
    offs = _wrapped_offsets(tmode.axis)
    order = np.argsort(offs)
    radial = np.sqrt(offs[order][:, None] ** 2 + offs[order][None, :] ** 2)
    vals = corr_grid[np.ix_(order, order)]
    rr = radial.ravel()
    vv = vals.ravel()
    srt = np.argsort(rr)

    def corr(u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return np.interp(u, rr[srt], vv[srt])

    return corr


def _wrapped_offsets(axis: np.ndarray) -> np.ndarray:
    n = len(axis)
    h = axis[1] - axis[0]
    span = n * h
    return (np.arange(n) * h + span / 2.0) % span - span / 2.0


def quasi1d(scaled: ScaledInteraction, tmode: TransverseMode,
            n_samples: int = 513, pad: float = 1.5) -> LineFunction:
    """w-bar(x) = intint |chi^eps(y1)|^2 |chi^eps(y2)|^2 w(x, y1-y2) dy1 dy2.

    Reduced to int T(u) w(x, u) du over the transverse-offset correlation T.
    """
    r = scaled.range
    if _points_across(tmode, scaled) < 8:
        raise ResolutionError("transverse grid does not resolve the interaction range")
    corr = _transverse_density_correlation(tmode)
    xs = np.linspace(-pad * r, pad * r, n_samples)
    nodes, weights = np.polynomial.legendre.leggauss(64)
    d = tmode.dimension
    vals = np.zeros_like(xs)
    for i, x in enumerate(xs):
        if abs(x) >= r:
            continue
        umax = math.sqrt(r**2 - x**2)
        if d == 1:
            u_nodes = umax * nodes  # Gauss-Legendre on the symmetric interval
            wv = scaled(np.sqrt(x**2 + u_nodes**2))
            vals[i] = float(np.sum(weights * umax * wv * corr(np.abs(u_nodes))))
        else:
            u_nodes = 0.5 * umax * (nodes + 1.0)
            wv = scaled(np.sqrt(x**2 + u_nodes**2))
            vals[i] = float(np.sum(weights * 0.5 * umax * wv * corr(u_nodes)
                                   * 2.0 * math.pi * u_nodes))
    vals = 0.5 * (vals + vals[::-1])
    return LineFunction(xs, vals)


def _points_across(tmode: TransverseMode, scaled: ScaledInteraction) -> float:
    return scaled.range / tmode.spacing


def greens_line(x_src, x_fld, half_width: float) -> np.ndarray:
    """Green's function of d^2/dx^2 on [-a, a] with zero boundary values."""
    a = half_width
    xs = np.asarray(x_src, dtype=float)
    xf = np.asarray(x_fld, dtype=float)
    lo = np.minimum(xs, xf)
    hi = np.maximum(xs, xf)
    return (lo + a) * (hi - a) / (2.0 * a)


@dataclass(frozen=True)
class LineGreenReport:
    boundary_left: float
    boundary_right: float
    residual: float
    sup_slope: float
    wing_slope: float
    wbar_l1: float
    green_symmetry: float


def build_h_bar(wbar: LineFunction, beta1: float, n_particles: int,
                mu: float, n_samples: int = 2049) -> tuple[LineFunction, LineFunction, LineGreenReport]:
    """Solve h'' = w-bar on [-N^-beta1, N^-beta1] with zero boundary values,
    plus the matching smooth step on [mu, N^-beta1]."""
    half = float(n_particles) ** (-beta1)
    support = np.max(np.abs(wbar.xs[np.abs(wbar.values) > 0])) if np.any(wbar.values != 0) else 0.0
    if support >= half:
        raise DomainError(
            f"support of w-bar ({support:.3g}) must lie inside (-{half:.3g}, {half:.3g})"
        )
    if mu >= half:
        raise RegimeError(f"need mu < N^-beta1, got mu={mu}, N^-beta1={half}")
    # source integrals on the w-bar grid itself (no resampling of a possibly
    # discontinuous profile); the cumulatives are continuous, so evaluating
    # them on the output grid by linear interpolation is benign, and the
    # weighted trapezoid is exact for piecewise-linear data
    src_lo = _cumtrapz(wbar.values * (wbar.xs + half), wbar.xs)
    src_hi_c = _cumtrapz(wbar.values * (wbar.xs - half), wbar.xs)
    xs = np.linspace(-half, half, n_samples)
    cums_xw = np.interp(xs, wbar.xs, src_lo, left=0.0, right=src_lo[-1])
    cum_hi = np.interp(xs, wbar.xs, src_hi_c, left=0.0, right=src_hi_c[-1])
    tail_hi = src_hi_c[-1] - cum_hi               # int_x^half (x'-half) w
    h = ((xs - half) * cums_xw + (xs + half) * tail_hi) / (2.0 * half)
    hprime = (cums_xw + tail_hi) / (2.0 * half)
    # residual of the second difference against w-bar on the source grid,
    # where the trapezoid cumulatives are consistent (interior, off the kinks)
    sstep = np.diff(wbar.xs)
    h_src = ((wbar.xs - half) * src_lo + (wbar.xs + half) * (src_hi_c[-1] - src_hi_c)) \
        / (2.0 * half)
    sup_w = float(np.max(np.abs(wbar.values))) or 1.0
    if np.max(np.abs(sstep - sstep[0])) < 1e-9 * sstep[0]:
        step0 = sstep[0]
        lap = (h_src[2:] - 2.0 * h_src[1:-1] + h_src[:-2]) / step0**2
        keep = np.ones(len(wbar.xs) - 2, dtype=bool)
        if support > 0:
            keep &= np.abs(np.abs(wbar.xs[1:-1]) - support) > 3.0 * step0
        residual = float(np.max(np.abs(lap[keep] - wbar.values[1:-1][keep])) / sup_w)
    else:
        residual = math.nan
    # wing slope: |h'| just outside the support
    hstep = xs[1] - xs[0]
    outside = np.abs(xs) > support + 3.0 * hstep if support > 0 else np.abs(xs) > 0
    wing = float(np.max(np.abs(hprime[outside]))) if np.any(outside) else 0.0
    # Green symmetry spot check
    rng = np.random.default_rng(7)
    xa = rng.uniform(-half, half, 64)
    xb = rng.uniform(-half, half, 64)
    gsym = float(np.max(np.abs(greens_line(xa, xb, half) - greens_line(xb, xa, half))))
    theta_line = LineFunction(xs, smooth_step(np.abs(xs), mu, half))
    report = LineGreenReport(
        boundary_left=float(abs(h[0])),
        boundary_right=float(abs(h[-1])),
        residual=residual,
        sup_slope=float(np.max(np.abs(hprime))),
        wing_slope=wing,
        wbar_l1=float(np.trapezoid(np.abs(wbar.values), wbar.xs)),
        green_symmetry=gsym,
    )
    return LineFunction(xs, h), theta_line, report


def _cumtrapz(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    return out


# ---------------------------------------------------------------------------
# effective-potential discrepancy Gamma(x1)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscrepancyResult:
    gamma: LineFunction
    l2_norm: float
    convolution_part: float      # L2 of the |Phi|^2-shift contribution
    smearing_part: float         # L2 of the transverse-smearing contribution


def discrepancy_gamma(scaled: ScaledInteraction, condensate: CondensateState,
                      tmode: TransverseMode, n_quad: int = 24) -> DiscrepancyResult:
    """Gamma(x1) = N int |chi^eps|^2 [ (|phi^eps|^2 * w)(z) - |phi^eps(z)|^2 |w|_L1 ] dy.

    Separability reduces this to a quadrature over the interaction support:

        Gamma(x1) = N intint w(s, u) [ |Phi(x1-s)|^2 T(u) - |Phi(x1)|^2 T(0) ] ds du,

    with T the transverse-density autocorrelation.  Longitudinal shifts are
    evaluated spectrally (exact for the band-limited grid state), so the small
    difference survives in floating point.
    """
    r = scaled.range
    grid = condensate.grid
    if r < 2.0 * grid.spacing / 16.0:
        raise ResolutionError("interaction range is far below the condensate grid scale")
    if _points_across(tmode, scaled) < 8:
        raise ResolutionError("transverse grid does not resolve the interaction range")
    corr = _transverse_density_correlation(tmode)
    t0 = float(corr(np.asarray([0.0]))[0])
    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    s_nodes = r * nodes
    s_weights = r * weights
    ft = np.fft.fft(condensate.values)
    k = grid.wavenumbers
    n_part = scaled.point.n_particles
    dens0 = np.abs(condensate.values) ** 2
    d = tmode.dimension
    total = np.zeros(grid.points)
    conv_only = np.zeros(grid.points)
    smear_only = np.zeros(grid.points)
    for s, sw in zip(s_nodes, s_weights):
        shifted = np.fft.ifft(ft * np.exp(-1j * k * s))
        dens_s = np.abs(shifted) ** 2
        umax = math.sqrt(max(r**2 - s**2, 0.0))
        if umax == 0.0:
            continue
        if d == 1:
            u = umax * nodes
            uw = umax * weights
            wv = scaled(np.sqrt(s**2 + u**2))
            tmat = corr(np.abs(u))
            wint_t = float(np.sum(uw * wv * tmat))
            wint_0 = float(np.sum(uw * wv)) * t0
        else:
            u = 0.5 * umax * (nodes + 1.0)
            uw = 0.5 * umax * weights * 2.0 * math.pi * u
            wv = scaled(np.sqrt(s**2 + u**2))
            tmat = corr(u)
            wint_t = float(np.sum(uw * wv * tmat))
            wint_0 = float(np.sum(uw * wv)) * t0
        total += sw * (dens_s * wint_t - dens0 * wint_0)
        conv_only += sw * (dens_s - dens0) * wint_t
        smear_only += sw * dens0 * (wint_t - wint_0)
    gamma_vals = n_part * total
    gl2 = math.sqrt(float(np.sum(gamma_vals**2) * grid.spacing))
    c2 = math.sqrt(float(np.sum((n_part * conv_only) ** 2) * grid.spacing))
    s2 = math.sqrt(float(np.sum((n_part * smear_only) ** 2) * grid.spacing))
    return DiscrepancyResult(LineFunction(grid.x, gamma_vals), gl2, c2, s2)


@dataclass(frozen=True)
class DiscrepancySweep:
    mu_over_eps: np.ndarray
    norms: np.ndarray
    fit: ScalingFit


def discrepancy_sweep(points, profile, condensate: CondensateState,
                      confinement, grid: "object", d_perp: int = 1) -> DiscrepancySweep:
    """Gamma norms along a scaling sequence, with the log-log fit vs mu/eps."""
    from .potentials import scale
    from .transverse import rescale as t_rescale, solve_modes

    pts = list(points)
    if len(pts) < 3:
        raise InsufficientDataError("discrepancy sweep needs >= 3 points")
    unscaled = solve_modes(confinement, grid, n_modes=2)
    ratios, norms = [], []
    for p in pts:
        sc = scale(profile, p, d_perp=d_perp)
        tm = t_rescale(unscaled, p.epsilon)
        res = discrepancy_gamma(sc, condensate, tm)
        ratios.append(p.mu_over_eps)
        norms.append(res.l2_norm)
    ratios = np.asarray(ratios)
    norms = np.asarray(norms)
    return DiscrepancySweep(ratios, norms, _loglog_fit(ratios, norms))
