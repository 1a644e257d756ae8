"""Standard normal quantile via a fixed rational approximation.

Wichura's PPND16 algorithm (Applied Statistics algorithm AS 241): three
rational approximations selected by |p - 1/2|, accurate to about 1e-16,
with a hard-coded constant table so confidence limits are bit-identical
across platforms and library versions.
"""

from __future__ import annotations

import numpy as np

_A = (
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
)
_B = (
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
)
_C = (
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
)
_D = (
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_E = (
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
)
_F = (
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _poly(coef, x):
    acc = coef[-1]
    for c in coef[-2::-1]:
        acc = acc * x + c
    return acc


def norm_ppf(p):
    """Inverse standard normal CDF for p in (0, 1); +-inf at the endpoints."""
    p_arr = np.asarray(p, dtype=float)
    scalar = p_arr.ndim == 0
    p_arr = np.atleast_1d(p_arr)
    if np.any((p_arr < 0.0) | (p_arr > 1.0)) or np.any(~np.isfinite(p_arr)):
        raise ValueError("probabilities must lie in [0, 1]")
    out = np.empty_like(p_arr)
    q = p_arr - 0.5
    central = np.abs(q) <= 0.425
    if np.any(central):
        r = 0.180625 - q[central] ** 2
        out[central] = q[central] * _poly(_A, r) / _poly(_B, r)
    tail = ~central
    if np.any(tail):
        pt = p_arr[tail]
        r = np.where(q[tail] < 0.0, pt, 1.0 - pt)
        with np.errstate(divide="ignore"):
            r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        rr = r[near] - 1.6
        val[near] = _poly(_C, rr) / _poly(_D, rr)
        rr = r[~near] - 5.0
        with np.errstate(invalid="ignore"):
            val[~near] = _poly(_E, rr) / _poly(_F, rr)
        val[np.isinf(r)] = np.inf
        out[tail] = np.where(q[tail] < 0.0, -val, val)
    return float(out[0]) if scalar else out
