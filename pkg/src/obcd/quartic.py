"""Real roots of polynomials of degree at most four, in closed form.

Quartics go through Ferrari's resolvent cubic, cubics through Cardano or
the trigonometric form, and every root is finished with a few Newton
steps on the original coefficients. Coefficients are ordered from the
leading term down: ``(c4, c3, c2, c1, c0)``.
"""

import math

from .exceptions import DegeneratePolynomial

DEGREE_TOL = 1e-12
MERGE_TOL = 1e-9
NEWTON_STEPS = 3
EPS = 2.0**-52
# near-zero discriminants within this relative slack count as double roots
_DISC_SLACK = 1e-10


def polyval(coeffs, t):
    acc = 0.0
    for c in coeffs:
        acc = acc * t + c
    return acc


def _polyval_deriv(coeffs, t):
    p = 0.0
    dp = 0.0
    for c in coeffs:
        dp = dp * t + p
        p = p * t + c
    return p, dp


def residual_bound(coeffs, t):
    """Acceptance threshold for ``|p(t)|`` at a computed root `t`."""
    total = sum(abs(c) for c in coeffs)
    return 1e-8 * max(1.0, total * max(1.0, abs(t)) ** 4)


def _quadratic(a, b, c, slack=_DISC_SLACK):
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        if disc < -slack * (b * b + abs(4.0 * a * c)):
            return []
        disc = 0.0
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    if q == 0.0:
        return [0.0, 0.0]
    return [q / a, c / q]


def _cubic_monic(a, b, c):
    """Real roots of ``x^3 + a x^2 + b x + c``."""
    if c == 0.0:
        return [0.0] + _quadratic(1.0, a, b)
    shift = a / 3.0
    P = b - a * shift
    Q = (2.0 * a * a * a) / 27.0 - a * b / 3.0 + c
    if P == 0.0 and Q == 0.0:
        roots = [0.0]
    else:
        half_q = 0.5 * Q
        third_p = P / 3.0
        disc = half_q * half_q + third_p * third_p * third_p
        if disc > 0.0 or P >= 0.0:
            # one real root (P >= 0 makes the cubic monotone)
            u = -half_q - math.copysign(math.sqrt(disc), half_q)
            u = math.copysign(abs(u) ** (1.0 / 3.0), u)
            roots = [u - third_p / u] if u != 0.0 else [0.0]
        else:
            # three real roots (P < 0 here)
            m = 2.0 * math.sqrt(-third_p)
            denom = P * m
            arg = 3.0 * Q / denom if denom != 0.0 else 0.0
            arg = min(1.0, max(-1.0, arg))
            base = math.acos(arg) / 3.0
            roots = [m * math.cos(base - 2.0 * math.pi * k / 3.0) for k in range(3)]
    coeffs = (1.0, a, b, c)
    return [_newton(coeffs, x - shift, 2) for x in roots]


def _quartic_monic(a, b, c, d):
    """Real roots of ``x^4 + a x^3 + b x^2 + c x + d``."""
    if d == 0.0:
        return [0.0] + _cubic_monic(a, b, c)
    # rescale x = sigma * u so the coefficients become O(1)
    sigma = max(abs(a), math.sqrt(abs(b)), abs(c) ** (1.0 / 3.0), abs(d) ** 0.25)
    if sigma == 0.0:
        return [0.0]
    # the floor keeps sigma**4 from underflowing
    sigma = 2.0 ** max(-64, round(math.log2(sigma)))
    a, b, c, d = a / sigma, b / sigma**2, c / sigma**3, d / sigma**4

    aa = a * a
    p = b - 0.375 * aa
    q = c - 0.5 * a * b + 0.125 * aa * a
    r = d - 0.25 * a * c + aa * b / 16.0 - 3.0 * aa * aa / 256.0
    shift = 0.25 * a

    # resolvent: m^3 - (p/2) m^2 - r m + (p r / 2 - q^2 / 8) = 0
    ms = _cubic_monic(-0.5 * p, -r, 0.5 * p * r - 0.125 * q * q)
    m = max(ms)
    s2 = 2.0 * m - p
    scale = max(1.0, abs(p), abs(m))
    ys = []
    if s2 <= 1e-13 * scale:
        # biquadratic y^4 + p y^2 + r
        for z in _quadratic(1.0, p, r):
            if z >= 0.0:
                ys += [math.sqrt(z), -math.sqrt(z)]
            elif z > -1e-12 * scale:
                ys.append(0.0)
    else:
        s = math.sqrt(s2)
        g = q / (2.0 * s)
        ys += _quadratic(1.0, s, m - g)
        ys += _quadratic(1.0, -s, m + g)
    return [(y - shift) * sigma for y in ys]


def _newton(coeffs, t, steps, local=False):
    pt, dp = _polyval_deriv(coeffs, t)
    for _ in range(steps):
        if pt == 0.0 or dp == 0.0:
            break
        tn = t - pt / dp
        # when only polishing, a long jump means p' ~ 0 and would land on another root
        if local and abs(tn - t) > 1e-3 * max(1.0, abs(t)):
            break
        pn, dn = _polyval_deriv(coeffs, tn)
        if not abs(pn) < abs(pt):
            break
        t, pt, dp = tn, pn, dn
    return t


def real_roots(coeffs):
    """Sorted real roots of ``c4 t^4 + c3 t^3 + c2 t^2 + c1 t + c0``.

    Leading coefficients below ``1e-12 * max|c|`` are dropped, so a nearly
    degenerate quartic is solved as a cubic (then quadratic, then linear).
    Roots closer than ``1e-9 * max(1, |t|)`` are merged. Spurious roots are not filtered;
    callers that square equations upstream evaluate their own objective on
    every candidate.

    Parameters
    ----------
    coeffs : sequence of 5 floats (shorter sequences are left-padded)

    Raises
    ------
    DegeneratePolynomial
        If every coefficient is zero, or any is not finite.
    """
    coeffs = [float(c) for c in coeffs]
    if len(coeffs) > 5:
        raise ValueError("at most degree 4 is supported")
    coeffs = [0.0] * (5 - len(coeffs)) + coeffs
    big = max(abs(c) for c in coeffs)
    if big == 0.0 or not all(math.isfinite(c) for c in coeffs):
        raise DegeneratePolynomial("polynomial is identically zero or not finite")
    # unit-max normalization: alpha * p and p take the same path up to rounding
    coeffs = [x / big for x in coeffs]
    big = 1.0
    c = _trim(coeffs, big)
    deg = len(c) - 1
    if deg == 0:
        return []
    abs_coeffs = [abs(x) for x in coeffs]
    # each entry is [t, order]: order k means t came from a root of p^(k)
    found = []

    def scale_at(t):
        # sum |c_i| max(1, |t|)^i: tighter than `residual_bound` far from
        # the origin, and linear in the coefficients
        return polyval(abs_coeffs, max(1.0, abs(t)))

    def excess(t):
        # relative residual above the rounding noise of evaluating p at t
        noise = 8.0 * EPS * polyval(abs_coeffs, abs(t))
        return max(abs(polyval(coeffs, t)) - noise, 0.0) / scale_at(t)

    def key(entry):
        # inside a cluster every residual is noise; roots of higher
        # derivatives are the better conditioned estimates there
        return excess(entry[0]), -entry[1]

    def offer(t, order):
        if not math.isfinite(t):
            return
        entry = [t, order]
        for m, old in enumerate(found):
            if abs(t - old[0]) <= 1e-6 * max(1.0, abs(old[0])):
                if key(entry) < key(old):
                    found[m] = entry
                return
        if excess(t) > 0.0:
            entry[0] = _newton(coeffs, t, NEWTON_STEPS, local=excess(t) <= 1e-8)
        if excess(entry[0]) <= 1e-8:
            found.append(entry)

    for t in _closed_form(c):
        offer(t, 0)
    if deg >= 2:
        # small roots are accurate as large roots of the reversed polynomial
        rev = _trim(c[::-1], big)
        if len(rev) >= 2:
            for u in _closed_form(rev):
                if u != 0.0:
                    offer(1.0 / u, 0)
        if c[-1] == 0.0:
            offer(0.0, 0)
        # a root of multiplicity m is where closed forms lose real roots to
        # rounding; it is also a simple root of p^(m-1)
        dc = c
        for order in range(1, deg):
            dc = [dc[k] * (len(dc) - 1 - k) for k in range(len(dc) - 1)]
            for t in _closed_form(_trim(dc, max(abs(x) for x in dc))):
                offer(t, order)

    found.sort()
    out = []
    for entry in found:
        t = entry[0]
        # neighbours with no hump of |p| between them sit in one valley
        # (a root cluster) and are one root
        if out and (
            t - out[-1][0] <= MERGE_TOL * max(1.0, abs(t))
            or excess(0.5 * (t + out[-1][0])) <= max(excess(t), excess(out[-1][0]))
        ):
            if key(entry) < key(out[-1]):
                out[-1] = entry
            continue
        out.append(entry)
    # a degree-d polynomial has at most d roots; surplus candidates are
    # near-duplicates of an ill-conditioned root, and the worst one goes
    while len(out) > deg:
        del out[max(range(len(out)), key=lambda m: key(out[m]))]
    return [e[0] for e in out]


def _trim(coeffs, big):
    lead = 0
    while lead < len(coeffs) - 1 and abs(coeffs[lead]) <= DEGREE_TOL * big:
        lead += 1
    return coeffs[lead:]


def _closed_form(c):
    deg = len(c) - 1
    if deg == 0:
        return []
    if deg == 1:
        return [-c[1] / c[0]]
    if deg == 2:
        return _quadratic(c[0], c[1], c[2])
    if deg == 3:
        return _cubic_monic(c[1] / c[0], c[2] / c[0], c[3] / c[0])
    return _quartic_monic(c[1] / c[0], c[2] / c[0], c[3] / c[0], c[4] / c[0])

