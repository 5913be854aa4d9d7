"""Closed-form statistics of the phase-adjustment process.

The phase estimate in each slot is the argument of a noncentral complex
product statistic; its error follows a Rician-type phase law governed by a
K-factor. Successive slots turn the helper-sum amplitude ratio into a Markov
chain whose marginals obey a change-of-variables recursion. This module
evaluates those laws, the resulting range-extension-factor distribution, and
the slot-duration bounds.

Numerical conventions: densities near the band edges carry inverse-square-
root singularities; all quadrature here integrates in an angle variable (or
with Chebyshev-weighted nodes) so the singular Jacobians cancel exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, ndtr

TWO_PI = 2.0 * math.pi


def qfunc(x):
    """Standard Gaussian CCDF Q(x), relative error <= 1e-10."""
    return ndtr(-np.asarray(x, dtype=float))


def k_factor(alpha, gamma2):
    """K-factor of the product statistic in a slot with amplitude ratio alpha.

    K = 4 a^6 g^2 / (a^4 g + 4 a^2 g + 1) with a = alpha and g = gamma2, the
    SNR of the third integrator at unit amplitude ratio.
    """
    a2 = np.asarray(alpha, dtype=float) ** 2
    g = gamma2
    return 4.0 * a2**3 * g * g / (a2 * a2 * g + 4.0 * a2 * g + 1.0)


def gaussian_approx_ok(alpha, gamma2):
    """Advisory flag: the two linear noise terms dominate the quadratic one.

    True when gamma0 + gamma1 >= 1, the regime where the phase-error law
    below is an accurate model of the estimator.
    """
    a2 = np.asarray(alpha, dtype=float) ** 2
    return a2 * a2 * gamma2 + 4.0 * a2 * gamma2 >= 1.0


def _phase_factor(z, K):
    """e^{-K} (1 + sqrt(4 pi K) z e^{K z^2} Q(-sqrt(2K) z)) for |z| <= 1.

    Evaluated in overflow-free form: the exponentials are combined into
    e^{-K(1-z^2)} for z >= 0 and into the scaled CCDF erfcx for z < 0.
    """
    z = np.asarray(z, dtype=float)
    K = np.broadcast_to(np.asarray(K, dtype=float), z.shape).copy()
    K = np.maximum(K, 0.0)
    amp = np.sqrt(4.0 * math.pi * K) * z
    pos = amp * np.exp(-K * (1.0 - z * z)) * ndtr(np.sqrt(2.0 * K) * z)
    neg = amp * np.exp(-K) * 0.5 * erfcx(np.sqrt(K) * np.abs(z))
    return np.exp(-K) + np.where(z >= 0.0, pos, neg)


def phase_error_pdf(phi, K):
    """Density of the per-slot phase estimation error at K-factor K."""
    if np.any(np.asarray(K) < 0):
        raise ValueError("K must be >= 0")
    phi = np.asarray(phi, dtype=float)
    out = _phase_factor(np.cos(phi), K) / TWO_PI
    return float(out) if out.ndim == 0 else out


def alpha_update(alpha_prev, phi_er):
    """Next amplitude ratio after joining one unit-amplitude tone.

    alpha_i = sqrt(1 + 2 alpha_{i-1} cos(phi_er) + alpha_{i-1}^2).
    """
    a = np.asarray(alpha_prev, dtype=float)
    val = 1.0 + 2.0 * a * np.cos(phi_er) + a * a
    return np.sqrt(np.maximum(val, 0.0))


def _conditional_core(alpha_i, alpha_prev, K_prev):
    """Conditional density values; zero outside the reachable band."""
    a = np.asarray(alpha_i, dtype=float)
    b = np.asarray(alpha_prev, dtype=float)
    z = (a * a - b * b - 1.0) / (2.0 * b)
    inside = np.abs(z) < 1.0
    zs = np.where(inside, z, 0.0)
    dens = _phase_factor(zs, K_prev) * a / (math.pi * b * np.sqrt(1.0 - zs * zs))
    return np.where(inside, dens, 0.0)


def conditional_alpha_pdf(alpha_i, alpha_prev, K_prev):
    """One-slot transition density f(alpha_i | alpha_prev) at K-factor K_prev."""
    if np.any(np.asarray(alpha_prev) <= 0.0):
        raise ValueError("alpha_prev must be > 0 (point mass handled analytically)")
    out = _conditional_core(alpha_i, alpha_prev, K_prev)
    return float(out) if out.ndim == 0 else out


def _alpha2_factor(z, K):
    """e^{-K} (1 + sqrt(pi K) z e^{K z^2 / 4} Q(-sqrt(K/2) z)), z in [-2, 2]."""
    z = np.asarray(z, dtype=float)
    K = max(float(K), 0.0)
    amp = np.sqrt(math.pi * K) * z
    pos = amp * np.exp(-K * (1.0 - z * z / 4.0)) * ndtr(np.sqrt(K / 2.0) * z)
    neg = amp * math.exp(-K) * 0.5 * erfcx(np.sqrt(K) * np.abs(z) / 2.0)
    return math.exp(-K) + np.where(z >= 0.0, pos, neg)


def alpha2_pdf(alpha2, K1):
    """Closed-form density of the amplitude ratio after the first slot."""
    a = np.asarray(alpha2, dtype=float)
    inside = (a >= 0.0) & (a < 2.0)
    asq = np.where(inside, a * a, 0.0)
    z = asq - 2.0
    dens = _alpha2_factor(z, K1) / math.pi * np.sqrt(4.0 / np.maximum(4.0 - asq, 1e-300))
    out = np.where(inside, dens, 0.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# gridded densities


class GriddedPdf:
    """Probability density tabulated on a bounded grid.

    Carries (grid, density, cdf); the running integral must reach 1 within
    1e-3 and the trapezoid normalization must land in [0.999, 1.001].
    """

    def __init__(self, grid, density, cdf=None, min_points: int = 2000):
        grid = np.asarray(grid, dtype=float)
        density = np.asarray(density, dtype=float)
        if grid.size < min_points:
            raise ValueError(f"grid must have >= {min_points} points")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if density.shape != grid.shape:
            raise ValueError("density shape must match grid")
        if np.min(density) < -1e-9 * max(np.max(density), 1.0):
            raise ValueError("density must be nonnegative")
        density = np.maximum(density, 0.0)
        total = np.trapezoid(density, grid)
        if not 0.999 <= total <= 1.001:
            raise ValueError(f"density integrates to {total:.6f}, outside [0.999, 1.001]")
        if cdf is None:
            steps = 0.5 * (density[1:] + density[:-1]) * np.diff(grid)
            cdf = np.concatenate([[0.0], np.cumsum(steps)])
        cdf = np.maximum.accumulate(np.asarray(cdf, dtype=float))
        if abs(cdf[-1] - 1.0) > 1e-3:
            raise ValueError("cdf must end within 1e-3 of 1")
        self.grid = grid
        self.density = density
        self.cdf = cdf

    @property
    def support(self):
        return float(self.grid[0]), float(self.grid[-1])

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def pdf_at(self, x):
        return np.interp(x, self.grid, self.density, left=0.0, right=0.0)

    def cdf_at(self, x):
        return np.interp(x, self.grid, self.cdf, left=0.0, right=1.0)

    def percentile(self, p):
        """Inverse CDF at percentile p (0..100), linear interpolation."""
        q = np.asarray(p, dtype=float) / 100.0
        if np.any((q < 0) | (q > 1)):
            raise ValueError("percentile must lie in [0, 100]")
        # strictly increasing copy for stable inversion
        c = self.cdf / self.cdf[-1]
        keep = np.concatenate([[True], np.diff(c) > 0])
        out = np.interp(q, c[keep], self.grid[keep])
        return float(out) if out.ndim == 0 else out


def _phase_pdf_on_half_circle(K, n):
    """Midpoint grid psi in (0, pi) and phase pdf values at K."""
    psi = (np.arange(n) + 0.5) * (math.pi / n)
    return psi, phase_error_pdf(psi, K)


def _alpha2_gridded(gamma2: float, points_per_unit: int) -> GriddedPdf:
    """f_{alpha_2} on an angle-clustered grid with an angle-domain CDF."""
    K1 = float(k_factor(1.0, gamma2))
    # adaptive resolution: the half-cell next to psi = 0 holds ~f(0) d/2 mass
    peak = phase_error_pdf(0.0, K1)
    n = max(2 * points_per_unit, int(math.pi * peak / 2.5e-4) + 1)
    psi, fphi = _phase_pdf_on_half_circle(K1, n)
    alpha = 2.0 * np.cos(psi / 2.0)          # decreasing in psi
    dens = alpha2_pdf(alpha, K1)
    # P[alpha_2 <= a(psi)] = P[|phi_er| >= psi], cumulative from psi upward
    dpsi = math.pi / n
    tail = 2.0 * np.cumsum(fphi[::-1])[::-1] * dpsi
    order = np.argsort(alpha)
    return GriddedPdf(alpha[order], dens[order], cdf=tail[order])


def _chebyshev_nodes(n: int):
    t = (np.arange(n) + 0.5) * (math.pi / n)
    return np.cos(t), math.pi / n


def _step_from_alpha2(grid_tgt, gamma2: float, K1: float, n_nodes: int = 384):
    """Marginalize the transition kernel over the slot-1 law, in angle form.

    f_3(a) = int_0^pi f(a | b(psi); K(b)) 2 f_phi(psi; K1) dpsi with
    b(psi) = 2 cos(psi/2). The kernel's band-edge singularities sit at
    interior psi points; the interval is split there and each segment is
    integrated with Chebyshev-clustered nodes so the inverse-square-root
    edges are exact.
    """
    cos_t, wt = _chebyshev_nodes(n_nodes)
    out = np.zeros_like(grid_tgt)
    for idx, a in enumerate(grid_tgt):
        a_eval = min(max(a, 0.0), 3.0 - 1e-12)
        if a_eval <= 0.0:
            continue
        # psi locations where the kernel band edges fall, from b = a -/+ 1
        cuts = [0.0, math.pi]
        for b_star in (a_eval - 1.0, a_eval + 1.0, 1.0 - a_eval):
            if 0.0 < b_star < 2.0:
                cuts.append(2.0 * math.acos(b_star / 2.0))
        cuts = np.unique(np.clip(cuts, 0.0, math.pi))
        total = 0.0
        for p, q in zip(cuts[:-1], cuts[1:]):
            if q - p < 1e-14:
                continue
            mid, half = 0.5 * (p + q), 0.5 * (q - p)
            psi = mid - half * cos_t
            w = wt * np.sqrt((psi - p) * (q - psi))
            b = 2.0 * np.cos(psi / 2.0)
            kern = _conditional_core(a_eval, b, k_factor(b, gamma2))
            total += np.sum(w * kern * 2.0 * phase_error_pdf(psi, K1))
        out[idx] = total
    return out


def _step_generic(grid_src, dens_src, upper_src: float, grid_tgt,
                  gamma2: float, n_nodes: int = 768, chunk: int = 256):
    """One marginalization step against a smooth gridded source density.

    For each target a the source integral runs over the reachable band
    [max(0, a-1, 1-a), min(a+1, upper_src)] with Chebyshev-clustered nodes,
    removing the kernel's inverse-square-root band edges exactly.
    """
    cos_t, wt = _chebyshev_nodes(n_nodes)
    out = np.zeros_like(grid_tgt)
    upper_tgt = upper_src + 1.0
    for start in range(0, grid_tgt.size, chunk):
        a = grid_tgt[start:start + chunk]
        a_eval = np.clip(a, 0.0, upper_tgt - 1e-12)
        lo = np.maximum.reduce([np.zeros_like(a_eval), a_eval - 1.0, 1.0 - a_eval])
        hi = np.minimum(a_eval + 1.0, upper_src)
        ok = hi > lo
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        b = mid[:, None] - half[:, None] * cos_t[None, :]
        b = np.clip(b, 1e-12, upper_src)
        w = wt * np.sqrt(np.maximum((b - lo[:, None]) * (hi[:, None] - b), 0.0))
        kern = _conditional_core(a_eval[:, None], b, k_factor(b, gamma2))
        f_src = np.interp(b, grid_src, dens_src, left=0.0, right=0.0)
        vals = np.sum(w * kern * f_src, axis=1)
        out[start:start + chunk] = np.where(ok, vals, 0.0)
    return out


def _target_grid(upper: float, points_per_unit: int):
    """Uniform grid on [0, upper] with geometric refinement inside the steep
    boundary layer next to the upper endpoint (the layer narrows like 1/K at
    high SNR, far below the uniform spacing)."""
    base = np.linspace(0.0, upper, int(points_per_unit * upper) + 1)
    tail = upper - np.geomspace(1e-9, 0.25, 256)
    return np.unique(np.concatenate([base, tail]))


def alpha_pdf_chain(i_max: int, gamma2: float,
                    points_per_unit: int = 4000) -> dict:
    """Marginal amplitude-ratio densities for every slot index up to i_max.

    Returns {i: GriddedPdf} for i = 2 .. i_max; the recursion shares the
    intermediate levels, so requesting several indices at once costs one
    chain.
    """
    if i_max < 2:
        raise ValueError("i_max must be >= 2")
    if gamma2 <= 0:
        raise ValueError("gamma2 must be > 0")
    out = {2: _alpha2_gridded(gamma2, points_per_unit)}
    if i_max == 2:
        return out
    K1 = float(k_factor(1.0, gamma2))
    grid = _target_grid(3.0, points_per_unit)
    dens = _step_from_alpha2(grid, gamma2, K1)
    level = 3
    while True:
        total = np.trapezoid(dens, grid)
        if abs(total - 1.0) > 0.01:
            raise ValueError(f"recursion normalization off by "
                             f"{abs(total - 1.0):.2e} at level {level}")
        out[level] = GriddedPdf(grid, dens)
        if level == i_max:
            return out
        grid_next = _target_grid(level + 1.0, points_per_unit)
        dens = _step_generic(grid, dens, float(level), grid_next, gamma2)
        grid, level = grid_next, level + 1


def alpha_pdf_recursive(i: int, gamma2: float,
                        points_per_unit: int = 4000) -> GriddedPdf:
    """Marginal density of the amplitude ratio after i - 1 adjustment slots.

    Slot 1 starts from the deterministic ratio 1, which is marginalized
    analytically; each further slot applies the transition kernel with the
    K-factor evaluated at the integration variable.
    """
    return alpha_pdf_chain(i, gamma2, points_per_unit)[i]


# ---------------------------------------------------------------------------
# range extension


def ref_coherent(M: int) -> float:
    """Range extension factor of perfectly coherent helper tones."""
    return (2.0 * M) ** (1.0 / 3.0)


def ref_conventional(M: int) -> float:
    """Range extension factor of a helper-free link given (M+1)x power."""
    return (M + 1.0) ** (1.0 / 3.0)


def snr_boost_coherent_db(M: int) -> float:
    """SNR gain of coherent helper tones over the helper-free link [dB]."""
    return 10.0 * math.log10(4.0 * M * M)


def snr_boost_incoherent_db(M: int) -> float:
    """Mean SNR gain with independent random tone phases [dB]."""
    return 10.0 * math.log10(4.0 * M)


def ref_distribution(alpha_pdf: GriddedPdf) -> GriddedPdf:
    """Distribution of the range extension factor zeta = (2 alpha)^(1/3).

    Change of variables with Jacobian 1.5 zeta^2: the density at zeta is
    1.5 zeta^2 f_alpha(zeta^3 / 2); the CDF maps across unchanged.
    """
    zeta = np.cbrt(2.0 * alpha_pdf.grid)
    dens = 1.5 * zeta**2 * alpha_pdf.density
    keep = np.concatenate([[True], np.diff(zeta) > 0])
    return GriddedPdf(zeta[keep], dens[keep], cdf=alpha_pdf.cdf[keep])


def ref_percentile(alpha_pdf: GriddedPdf, p) -> float:
    """Percentile of the range extension factor from the alpha density."""
    return float(np.cbrt(2.0 * alpha_pdf.percentile(p)))


def incoherent_power_cdf(z, M: int, a_r: float):
    """CDF of the intermodulation power with incoherent helper phases.

    Pr[P_i <= z] = 1 - exp(-z / (4 M A_r^4)) for many independent helpers.
    """
    z = np.asarray(z, dtype=float)
    out = -np.expm1(-np.maximum(z, 0.0) / (4.0 * M * a_r**4))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SlotBounds:
    """Feasible slot-duration interval [s]."""

    t_min: float
    t_max: float

    @property
    def feasible(self) -> bool:
        return self.t_min <= self.t_max


def slot_bounds(M: int, dtheta_max: float, omega_er_max: float,
                gamma2_min: float, noise_psd: float, p_h_min: float) -> SlotBounds:
    """Slot-duration bounds from estimator SNR and LO drift.

    Lower bound gamma2_min N0 / P_h_min keeps the third-integrator SNR above
    gamma2_min; upper bound dtheta_max / ((M-1) omega_er_max) keeps the
    pairwise drift over the whole adjustment interval below dtheta_max.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    for name, val in (("dtheta_max", dtheta_max), ("gamma2_min", gamma2_min),
                      ("noise_psd", noise_psd), ("p_h_min", p_h_min)):
        if val <= 0:
            raise ValueError(f"{name} must be > 0")
    t_min = gamma2_min * noise_psd / p_h_min
    if M >= 2:
        if omega_er_max <= 0:
            raise ValueError("omega_er_max must be > 0")
        t_max = dtheta_max / ((M - 1) * omega_er_max)
    else:
        t_max = math.inf
    return SlotBounds(t_min, t_max)


# ---------------------------------------------------------------------------
# sampling support for consistency checks


class PhaseErrorSampler:
    """Inverse-CDF sampler for the phase-error law over a range of K.

    Quantile tables are built on a log-spaced K grid and blended linearly in
    log K, so per-draw K values from the amplitude recursion can be sampled
    without per-trial quadrature.
    """

    def __init__(self, k_max: float, n_k: int = 512, n_phi: int = 4001,
                 k_min: float = 1e-9):
        self.log_k = np.linspace(math.log(k_min), math.log(max(k_max, k_min * 10)), n_k)
        self.phi = np.linspace(-math.pi, math.pi, n_phi)
        cdfs = np.empty((n_k, n_phi))
        for row, lk in enumerate(self.log_k):
            pdf = phase_error_pdf(self.phi, math.exp(lk))
            c = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) / 2.0
                                                 * np.diff(self.phi))])
            cdfs[row] = c / c[-1]
        self.cdfs = cdfs

    def sample(self, K, rng: np.random.Generator):
        K = np.atleast_1d(np.asarray(K, dtype=float))
        u = rng.random(K.shape)
        lk = np.clip(np.log(np.maximum(K, 1e-300)), self.log_k[0], self.log_k[-1])
        idx = np.clip(np.searchsorted(self.log_k, lk) - 1, 0, len(self.log_k) - 2)
        w = (lk - self.log_k[idx]) / (self.log_k[idx + 1] - self.log_k[idx])
        lo = np.empty_like(u)
        hi = np.empty_like(u)
        for row in np.unique(idx):
            m = idx == row
            lo[m] = np.interp(u[m], self.cdfs[row], self.phi)
            hi[m] = np.interp(u[m], self.cdfs[row + 1], self.phi)
        return lo * (1.0 - w) + hi * w
