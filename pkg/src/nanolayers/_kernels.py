"""Layered-sphere Mie recursion kernels, Numba-jitted with a NumPy fallback.

Per wavelength, external coefficients of a stratified sphere are obtained by
propagating logarithmic-derivative ratios of the Riccati-Bessel functions
(psi, chi, xi = psi - i*chi) from the core outward. Downward continued
fractions supply D1 = psi'/psi, an upward product recursion supplies
D3 = xi'/xi, and the cross ratio Q = psi(z1)*xi(z2) / (xi(z1)*psi(z2))
is propagated upward in order; all three avoid raw Riccati-Bessel values,
which overflow for large or absorbing arguments.

Two backends implement the same arithmetic:

* scalar kernels compiled with ``numba.njit`` (default), looping over the
  wavelength axis, and
* a pure-NumPy path vectorized across wavelengths.

Set ``NANOLAYERS_NUMBA=0`` to force the NumPy path; it is also selected
automatically when Numba is not importable. Per backend, results are
bit-deterministic; across backends they agree to ~1e-12 relative (complex
division rounds differently). ``benchmarks/bench_oracle.py`` times both.
"""

from __future__ import annotations

import cmath
import math
import os

import numpy as np

_FLAG = os.environ.get("NANOLAYERS_NUMBA", "1").strip().lower()
_WANT_NUMBA = _FLAG not in ("0", "false", "off", "no")

NUMBA_ENABLED = False
if _WANT_NUMBA:
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


class KernelError(Exception):
    """Non-finite value inside the Mie recursion (overflow or breakdown)."""

    def __init__(self, stage, layer, order, wavelength_index):
        super().__init__(
            f"non-finite Mie recursion value in stage {stage!r} at layer "
            f"{layer}, order {order}, wavelength index {wavelength_index}"
        )
        self.stage = stage
        self.layer = layer
        self.order = order
        self.wavelength_index = wavelength_index


# --------------------------------------------------------------------------
# scalar kernels (Numba-compiled when available)
# --------------------------------------------------------------------------


def _s_log_deriv_down(z, nstop, nmx, out):
    # out[n] <- D1_n(z) = psi_n'(z)/psi_n(z); downward continued fraction
    # started ~15 orders above max(nstop, |z|), seeded with 0.
    d = 0.0 + 0.0j
    for j in range(nmx, 0, -1):
        r = j / z
        d = r - 1.0 / (d + r)
        if j <= nstop + 1:
            out[j - 1] = d


def _s_log_deriv_up3(z, nstop, d1, out):
    # out[n] <- D3_n(z) = xi_n'(z)/xi_n(z) via the psi*xi product recursion;
    # psi_n*xi_n stays O(z/n), so nothing overflows. Requires Im(z) >= 0.
    psixi = 0.5 * (1.0 - cmath.exp(2j * z))
    out[0] = 1j
    for n in range(1, nstop + 1):
        t = n / z
        psixi = psixi * (t - d1[n - 1]) * (t - out[n - 1])
        out[n] = d1[n] + 1j / psixi


def _s_q_ratio(z1, z2, nstop, d1a, d3a, d1b, d3b, out):
    # out[n] <- psi_n(z1)*xi_n(z2) / (xi_n(z1)*psi_n(z2)), upward in n from
    # the closed n=0 form, using psi_n/psi_{n-1} = 1/(D1_n + n/z) and the
    # xi analogue. Bounded for Im(z) >= 0 and |z2| >= |z1|.
    e1 = cmath.exp(2j * z1)
    e2 = cmath.exp(2j * z2)
    out[0] = cmath.exp(2j * (z2 - z1)) * (e1 - 1.0) / (e2 - 1.0)
    for n in range(1, nstop + 1):
        t1 = n / z1
        t2 = n / z2
        out[n] = out[n - 1] * ((d1b[n] + t2) * (d3a[n] + t1)) / (
            (d1a[n] + t1) * (d3b[n] + t2)
        )


def _s_riccati_real(x, nstop, psi, chi):
    # Upward recurrences at the real outer argument (BHMIE style). psi decays
    # past the turning point, chi grows; at the Wiscombe truncation the
    # upward error amplification is bounded and cancels in the a_n/b_n ratio.
    s = math.sin(x)
    c = math.cos(x)
    psi[0] = s
    chi[0] = c
    psi[1] = s / x - c
    chi[1] = c / x + s
    for n in range(2, nstop + 1):
        f = (2.0 * n - 1.0) / x
        psi[n] = f * psi[n - 1] - psi[n - 2]
        chi[n] = f * chi[n - 1] - chi[n - 2]


def _s_coefficients(x, m, nstop, nmx, ha, hb, d1a, d3a, d1b, d3b, q, psi, chi, a, b):
    # Fill a[n], b[n] for n = 1..nstop given per-layer size parameters x
    # (ascending) and relative indices m. Work arrays are caller-provided so
    # the grid loop reuses them.
    nlayers = x.shape[0]
    _s_log_deriv_down(m[0] * x[0], nstop, nmx, ha)
    for n in range(nstop + 1):
        hb[n] = ha[n]
    for lay in range(1, nlayers):
        z1 = m[lay] * x[lay - 1]
        z2 = m[lay] * x[lay]
        _s_log_deriv_down(z1, nstop, nmx, d1a)
        _s_log_deriv_up3(z1, nstop, d1a, d3a)
        _s_log_deriv_down(z2, nstop, nmx, d1b)
        _s_log_deriv_up3(z2, nstop, d1b, d3b)
        _s_q_ratio(z1, z2, nstop, d1a, d3a, d1b, d3b, q)
        mo = m[lay]
        mi = m[lay - 1]
        for n in range(1, nstop + 1):
            g1 = mo * ha[n] - mi * d1a[n]
            g2 = mo * ha[n] - mi * d3a[n]
            gt1 = mi * hb[n] - mo * d1a[n]
            gt2 = mi * hb[n] - mo * d3a[n]
            ha[n] = (g2 * d1b[n] - q[n] * g1 * d3b[n]) / (g2 - q[n] * g1)
            hb[n] = (gt2 * d1b[n] - q[n] * gt1 * d3b[n]) / (gt2 - q[n] * gt1)
    xl = x[nlayers - 1]
    ml = m[nlayers - 1]
    _s_riccati_real(xl, nstop, psi, chi)
    for n in range(1, nstop + 1):
        xi_n = complex(psi[n], -chi[n])
        xi_p = complex(psi[n - 1], -chi[n - 1])
        fa = ha[n] / ml + n / xl
        fb = hb[n] * ml + n / xl
        a[n] = (fa * psi[n] - psi[n - 1]) / (fa * xi_n - xi_p)
        b[n] = (fb * psi[n] - psi[n - 1]) / (fb * xi_n - xi_p)


def _s_sigma_grid(xs, ms, k, nstops, nmxs):
    # Scattering cross-sections for every wavelength of one stack.
    nwav, _ = xs.shape
    nmax = 0
    for w in range(nwav):
        if nstops[w] > nmax:
            nmax = nstops[w]
    ha = np.empty(nmax + 1, np.complex128)
    hb = np.empty(nmax + 1, np.complex128)
    d1a = np.empty(nmax + 1, np.complex128)
    d3a = np.empty(nmax + 1, np.complex128)
    d1b = np.empty(nmax + 1, np.complex128)
    d3b = np.empty(nmax + 1, np.complex128)
    q = np.empty(nmax + 1, np.complex128)
    psi = np.empty(nmax + 1, np.float64)
    chi = np.empty(nmax + 1, np.float64)
    a = np.zeros(nmax + 1, np.complex128)
    b = np.zeros(nmax + 1, np.complex128)
    sigma = np.empty(nwav, np.float64)
    for w in range(nwav):
        nstop = nstops[w]
        _s_coefficients(
            xs[w], ms[w], nstop, nmxs[w], ha, hb, d1a, d3a, d1b, d3b, q, psi, chi, a, b
        )
        total = 0.0
        for n in range(1, nstop + 1):
            an = a[n]
            bn = b[n]
            total += (2.0 * n + 1.0) * (
                an.real * an.real
                + an.imag * an.imag
                + bn.real * bn.real
                + bn.imag * bn.imag
            )
        kw = k[w]
        sigma[w] = 2.0 * math.pi / (kw * kw) * total
    return sigma


def _s_ab_grid(xs, ms, nstops, nmxs):
    # External coefficients for every wavelength; columns above a
    # wavelength's own truncation stay zero.
    nwav, _ = xs.shape
    nmax = 0
    for w in range(nwav):
        if nstops[w] > nmax:
            nmax = nstops[w]
    ha = np.empty(nmax + 1, np.complex128)
    hb = np.empty(nmax + 1, np.complex128)
    d1a = np.empty(nmax + 1, np.complex128)
    d3a = np.empty(nmax + 1, np.complex128)
    d1b = np.empty(nmax + 1, np.complex128)
    d3b = np.empty(nmax + 1, np.complex128)
    q = np.empty(nmax + 1, np.complex128)
    psi = np.empty(nmax + 1, np.float64)
    chi = np.empty(nmax + 1, np.float64)
    a = np.zeros((nwav, nmax + 1), np.complex128)
    b = np.zeros((nwav, nmax + 1), np.complex128)
    for w in range(nwav):
        _s_coefficients(
            xs[w],
            ms[w],
            nstops[w],
            nmxs[w],
            ha,
            hb,
            d1a,
            d3a,
            d1b,
            d3b,
            q,
            psi,
            chi,
            a[w],
            b[w],
        )
    return a, b


if NUMBA_ENABLED:
    _jit = _njit(cache=True, nogil=True)
    _s_log_deriv_down = _jit(_s_log_deriv_down)
    _s_log_deriv_up3 = _jit(_s_log_deriv_up3)
    _s_q_ratio = _jit(_s_q_ratio)
    _s_riccati_real = _jit(_s_riccati_real)
    _s_coefficients = _jit(_s_coefficients)
    _s_sigma_grid = _jit(_s_sigma_grid)
    _s_ab_grid = _jit(_s_ab_grid)


# --------------------------------------------------------------------------
# NumPy backend, vectorized across the wavelength axis
# --------------------------------------------------------------------------


def _np_log_deriv_down(z, nstop_max, nmx):
    nmx_max = int(nmx.max())
    out = np.empty((nstop_max + 1, z.shape[0]), np.complex128)
    d = np.zeros(z.shape[0], np.complex128)
    for j in range(nmx_max, 0, -1):
        r = j / z
        d = np.where(j <= nmx, r - 1.0 / (d + r), d)
        if j <= nstop_max + 1:
            out[j - 1] = d
    return out


def _np_log_deriv_up3(z, nstop_max, d1):
    out = np.empty_like(d1)
    psixi = 0.5 * (1.0 - np.exp(2j * z))
    out[0] = 1j
    for n in range(1, nstop_max + 1):
        t = n / z
        psixi = psixi * (t - d1[n - 1]) * (t - out[n - 1])
        out[n] = d1[n] + 1j / psixi
    return out


def _np_q_ratio(z1, z2, nstop_max, d1a, d3a, d1b, d3b):
    out = np.empty((nstop_max + 1, z1.shape[0]), np.complex128)
    e1 = np.exp(2j * z1)
    e2 = np.exp(2j * z2)
    out[0] = np.exp(2j * (z2 - z1)) * (e1 - 1.0) / (e2 - 1.0)
    for n in range(1, nstop_max + 1):
        t1 = n / z1
        t2 = n / z2
        out[n] = out[n - 1] * ((d1b[n] + t2) * (d3a[n] + t1)) / (
            (d1a[n] + t1) * (d3b[n] + t2)
        )
    return out


def _np_riccati_real(x, nstop_max):
    psi = np.empty((nstop_max + 1, x.shape[0]), np.float64)
    chi = np.empty_like(psi)
    s = np.sin(x)
    c = np.cos(x)
    psi[0] = s
    chi[0] = c
    psi[1] = s / x - c
    chi[1] = c / x + s
    for n in range(2, nstop_max + 1):
        f = (2.0 * n - 1.0) / x
        psi[n] = f * psi[n - 1] - psi[n - 2]
        chi[n] = f * chi[n - 1] - chi[n - 2]
    return psi, chi


def _np_check(stage, layer, values):
    finite = np.isfinite(values)
    if finite.all():
        return
    order, wav = np.argwhere(~finite)[0]
    raise KernelError(stage, layer, int(order), int(wav))


def _np_ab_grid(xs, ms, nstops, nmxs):
    nwav, nlayers = xs.shape
    nstop_max = int(nstops.max())
    with np.errstate(all="ignore"):
        ha = _np_log_deriv_down(ms[:, 0] * xs[:, 0], nstop_max, nmxs)
        _np_check("core log-derivative", 0, ha)
        hb = ha.copy()
        for lay in range(1, nlayers):
            z1 = ms[:, lay] * xs[:, lay - 1]
            z2 = ms[:, lay] * xs[:, lay]
            d1a = _np_log_deriv_down(z1, nstop_max, nmxs)
            d3a = _np_log_deriv_up3(z1, nstop_max, d1a)
            d1b = _np_log_deriv_down(z2, nstop_max, nmxs)
            d3b = _np_log_deriv_up3(z2, nstop_max, d1b)
            q = _np_q_ratio(z1, z2, nstop_max, d1a, d3a, d1b, d3b)
            mo = ms[:, lay][None, :]
            mi = ms[:, lay - 1][None, :]
            g1 = mo * ha - mi * d1a
            g2 = mo * ha - mi * d3a
            gt1 = mi * hb - mo * d1a
            gt2 = mi * hb - mo * d3a
            ha = (g2 * d1b - q * g1 * d3b) / (g2 - q * g1)
            hb = (gt2 * d1b - q * gt1 * d3b) / (gt2 - q * gt1)
            _np_check("layer recursion", lay, ha)
            _np_check("layer recursion", lay, hb)
        xl = xs[:, nlayers - 1]
        ml = ms[:, nlayers - 1]
        psi, chi = _np_riccati_real(xl, nstop_max)
        _np_check("outer Riccati-Bessel", nlayers - 1, psi)
        _np_check("outer Riccati-Bessel", nlayers - 1, chi)
        xi = psi - 1j * chi
        orders = np.arange(nstop_max + 1, dtype=np.float64)[:, None]
        fa = ha / ml[None, :] + orders / xl[None, :]
        fb = hb * ml[None, :] + orders / xl[None, :]
        a = np.zeros((nstop_max + 1, nwav), np.complex128)
        b = np.zeros_like(a)
        a[1:] = (fa[1:] * psi[1:] - psi[:-1]) / (fa[1:] * xi[1:] - xi[:-1])
        b[1:] = (fb[1:] * psi[1:] - psi[:-1]) / (fb[1:] * xi[1:] - xi[:-1])
        valid = orders <= nstops[None, :]
        a = np.where(valid, a, 0.0)
        b = np.where(valid, b, 0.0)
    _np_check("external coefficients", nlayers - 1, a)
    _np_check("external coefficients", nlayers - 1, b)
    return a.T.copy(), b.T.copy()


def _np_sigma_grid(xs, ms, k, nstops, nmxs):
    a, b = _np_ab_grid(xs, ms, nstops, nmxs)
    orders = np.arange(a.shape[1], dtype=np.float64)[None, :]
    weights = 2.0 * orders + 1.0
    total = np.sum(weights * (np.abs(a) ** 2 + np.abs(b) ** 2), axis=1)
    return 2.0 * np.pi / (k * k) * total


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


def active_backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def sigma_grid(xs, ms, k, nstops, nmxs):
    """Cross-section per wavelength via the active backend."""
    if NUMBA_ENABLED:
        return _s_sigma_grid(xs, ms, k, nstops, nmxs)
    return _np_sigma_grid(xs, ms, k, nstops, nmxs)


def ab_grid(xs, ms, nstops, nmxs):
    """External Mie coefficient arrays (nwav, nmax+1) via the active backend."""
    if NUMBA_ENABLED:
        return _s_ab_grid(xs, ms, nstops, nmxs)
    return _np_ab_grid(xs, ms, nstops, nmxs)


def sigma_grid_numpy(xs, ms, k, nstops, nmxs):
    """Always the NumPy path (fallback benchmark / failure diagnosis)."""
    return _np_sigma_grid(xs, ms, k, nstops, nmxs)


def sigma_grid_numba(xs, ms, k, nstops, nmxs):
    """Always the Numba path; raises if Numba is unavailable."""
    if not NUMBA_ENABLED:
        raise RuntimeError("Numba backend is not available")
    return _s_sigma_grid(xs, ms, k, nstops, nmxs)
