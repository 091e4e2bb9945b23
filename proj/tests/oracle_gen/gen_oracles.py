#!/usr/bin/env python3
"""Generate frozen oracle tables for the C++ test suite.

Everything here is computed with exact rational arithmetic (sympy) or
high-precision quadrature (mpmath, 50 digits) and written to C++ include
files under tests/data/.  The C++ implementation must reproduce these
numbers independently; the two code paths share no code.

Inputs are dyadic rationals (denominator a power of two) so that the
double values embedded in the tables are *exactly* the numbers the
symbolic computation used.

Run from the repo root:  python3 tests/oracle_gen/gen_oracles.py
Outputs are checked in; rerunning must be a no-op (fixed seed).
"""

import random
from fractions import Fraction

import sympy as sp
import mpmath as mp

mp.mp.dps = 50

SEED = 20260817
OUT_DIR = "tests/data"


def dyadic(lo, hi, den=32):
    """Random Fraction p/den with p/den in [lo, hi]; exactly a double."""
    p = random.randint(int(lo * den), int(hi * den))
    return Fraction(p, den)


def fmt(x, digits=17):
    """Format an mpmath/sympy number as a C++ double literal."""
    s = mp.nstr(mp.mpf(x), digits, strip_zeros=False)
    if "." not in s and "e" not in s and "inf" not in s and "nan" not in s:
        s += ".0"
    return s


def sig(mu):
    # Minkowski signature diag(+1, -1, ..., -1), index 0 = time.
    return 1 if mu == 0 else -1


# ---------------------------------------------------------------------------
# Null forms on first-derivative vectors (index 0 = t).

def q0(f1, g1, n):
    return f1[0] * g1[0] - sum(f1[i] * g1[i] for i in range(1, n + 1))


def qmn(f1, g1, mu, nu):
    return f1[mu] * g1[nu] - f1[nu] * g1[mu]


def qup(f1, g1, mu, nu):
    return sig(mu) * sig(nu) * qmn(f1, g1, mu, nu)


# ---------------------------------------------------------------------------
# Source terms of the theta/phi evolution system.
#
#   box(theta) = F = -1/2 sin(2 th) Q(ph,ph)
#                    -1/4 sin(2 th) Q_{mn}(th,ph) Q^{mn}(th,ph)
#                    -1/2 cos^2(th) Q_{mn}(ph, Q^{mn}(th,ph))
#   box(phi)   = G = sin^2(th) box(ph) + sin(2 th) Q(th,ph)
#                    +1/2 cos^2(th) Q_{mn}(th, Q^{mn}(th,ph))
#
# The nested terms differentiate the inner form, so second derivatives of
# both fields appear; everything is affine in those.

def inner_form_derivative(th1, ph1, th2, ph2, alpha, mu, nu):
    """d_alpha of Q^{mu nu}(theta, phi) by the product rule."""
    return sig(mu) * sig(nu) * (
        th2[alpha][mu] * ph1[nu] + th1[mu] * ph2[alpha][nu]
        - th2[alpha][nu] * ph1[mu] - th1[nu] * ph2[alpha][mu])


def eval_F_G(thv, th1, th2, ph1, ph2, n):
    """Returns (F, G, F1, G1, |F| term scale, |G| term scale) symbolically."""
    s2 = sp.sin(2 * thv)
    c2 = sp.cos(thv) ** 2

    qpp = q0(ph1, ph1, n)
    qq = sum(qmn(th1, ph1, mu, nu) * qup(th1, ph1, mu, nu)
             for mu in range(n + 1) for nu in range(n + 1))

    nestF = sp.S(0)
    nestG = sp.S(0)
    for mu in range(n + 1):
        for nu in range(n + 1):
            dW = [inner_form_derivative(th1, ph1, th2, ph2, a, mu, nu)
                  for a in range(n + 1)]
            nestF += ph1[mu] * dW[nu] - ph1[nu] * dW[mu]
            nestG += th1[mu] * dW[nu] - th1[nu] * dW[mu]

    fA = -sp.Rational(1, 2) * s2 * qpp
    fB = -sp.Rational(1, 4) * s2 * qq
    fC = -sp.Rational(1, 2) * c2 * nestF
    F = fA + fB + fC
    F1 = fA + fB

    box_ph = ph2[0][0] - sum(ph2[i][i] for i in range(1, n + 1))
    gA = (sp.sin(thv) ** 2) * box_ph
    gB = s2 * q0(th1, ph1, n)
    gC = sp.Rational(1, 2) * c2 * nestG
    G = gA + gB + gC
    G1 = gB

    Fscale = sp.Abs(fA) + sp.Abs(fB) + sp.Abs(fC)
    Gscale = sp.Abs(gA) + sp.Abs(gB) + sp.Abs(gC)
    return F, G, F1, G1, Fscale, Gscale


def gen_rhs_cases(n_per_dim=50):
    random.seed(SEED)
    rows = []
    for n in (2, 3):
        for _ in range(n_per_dim):
            thv = dyadic(-1.3, 1.3)
            phv = dyadic(-1.3, 1.3)
            th1 = [dyadic(-2, 2) for _ in range(n + 1)]
            ph1 = [dyadic(-2, 2) for _ in range(n + 1)]

            def sym2():
                m = [[Fraction(0)] * (n + 1) for _ in range(n + 1)]
                for a in range(n + 1):
                    for b in range(a, n + 1):
                        m[a][b] = m[b][a] = dyadic(-2, 2)
                return m

            th2 = sym2()
            ph2 = sym2()

            thv_s = sp.Rational(thv.numerator, thv.denominator)
            F, G, F1, G1, Fs, Gs = eval_F_G(
                thv_s,
                [sp.Rational(v.numerator, v.denominator) for v in th1],
                [[sp.Rational(v.numerator, v.denominator) for v in r] for r in th2],
                [sp.Rational(v.numerator, v.denominator) for v in ph1],
                [[sp.Rational(v.numerator, v.denominator) for v in r] for r in ph2],
                n)

            # Principal coefficients: exact Jacobian of (F,G) in the two
            # second-time slots (F,G are affine in them).
            tt_th, tt_ph = sp.symbols("tt_th tt_ph")
            th2s = [r[:] for r in th2]
            ph2s = [r[:] for r in ph2]
            th2s = [[sp.Rational(v.numerator, v.denominator) for v in r] for r in th2]
            ph2s = [[sp.Rational(v.numerator, v.denominator) for v in r] for r in ph2]
            th2s[0][0] = tt_th
            ph2s[0][0] = tt_ph
            Fsym, Gsym, _, _, _, _ = eval_F_G(
                thv_s,
                [sp.Rational(v.numerator, v.denominator) for v in th1],
                th2s,
                [sp.Rational(v.numerator, v.denominator) for v in ph1],
                ph2s, n)
            m00 = sp.diff(Fsym, tt_th)
            m01 = sp.diff(Fsym, tt_ph)
            m10 = sp.diff(Gsym, tt_th)
            m11 = sp.diff(Gsym, tt_ph)

            vals = [sp.N(e, 40) for e in (F, G, F1, G1, Fs, Gs, m00, m01, m10, m11)]
            rows.append((n, thv, phv, th1, ph1, th2, ph2, vals))
    return rows


def write_rhs(rows, path):
    with open(path, "w") as f:
        f.write("// Generated by tests/oracle_gen/gen_oracles.py -- do not edit.\n")
        f.write("// Exact-arithmetic evaluations of the evolution source terms\n")
        f.write("// on random dyadic-rational jets, with the principal-slot Jacobian.\n")
        f.write("static const RhsOracleCase kRhsOracleCases[] = {\n")
        for (n, thv, phv, th1, ph1, th2, ph2, vals) in rows:
            F, G, F1, G1, Fs, Gs, m00, m01, m10, m11 = vals

            def arr(v, length=4, pad=0.0):
                out = [float(x) for x in v] + [pad] * (length - len(v))
                return "{" + ", ".join(fmt(x) for x in out) + "}"

            def mat(m2):
                rows4 = []
                for a in range(4):
                    row = []
                    for b in range(4):
                        if a < len(m2) and b < len(m2):
                            row.append(float(m2[a][b]))
                        else:
                            row.append(0.0)
                    rows4.append("{" + ", ".join(fmt(x) for x in row) + "}")
                return "{" + ", ".join(rows4) + "}"

            f.write("  {%d, %s, %s,\n" % (n, fmt(float(thv)), fmt(float(phv))))
            f.write("   %s,\n   %s,\n" % (arr(th1), arr(ph1)))
            f.write("   %s,\n   %s,\n" % (mat(th2), mat(ph2)))
            f.write("   %s, %s, %s, %s, %s, %s,\n" %
                    (fmt(F), fmt(G), fmt(F1), fmt(G1), fmt(Fs), fmt(Gs)))
            f.write("   {{%s, %s}, {%s, %s}}},\n" %
                    (fmt(m00), fmt(m01), fmt(m10), fmt(m11)))
        f.write("};\n")


# ---------------------------------------------------------------------------
# Modified energy densities.
#
#   e0  = 1/2 (|D au|^2 + |D av|^2)
#   et0 = 1/2 sin^2(u+b) |D av|^2
#         + cos^2(u+b) (av)_t sum_m b_m Q^{m0}(b, av)
#         - 1/4 cos^2(u+b) sum_{mn} Q_{mn}(b, av) Q^{mn}(b, av)
#   e1  = five cross terms, cubic or higher in the perturbation; the second
#         term's last factor differs between the 3D and 2D derivations
#         (Q^{m0}(u+b, av) vs Q^{m0}(u, av)) and both variants are emitted.
# 'b' is the background field; 'au'/'av' are the commuted fields.

def density(u, b, v, au, av, n, second_term_uses_u_plus_b):
    uv = u[0]
    bv = b[0]
    u1, b1, v1, au1, av1 = u[1], b[1], v[1], au[1], av[1]
    ub1 = [u1[m] + b1[m] for m in range(n + 1)]

    s2 = sp.sin(uv + bv) ** 2
    c2 = sp.cos(uv + bv) ** 2

    Dav2 = sum(x * x for x in av1)
    Dau2 = sum(x * x for x in au1)
    e0 = sp.Rational(1, 2) * (Dau2 + Dav2)

    et0 = (sp.Rational(1, 2) * s2 * Dav2
           + c2 * av1[0] * sum(b1[m] * qup(b1, av1, m, 0) for m in range(n + 1))
           - sp.Rational(1, 4) * c2 * sum(qmn(b1, av1, m, nn) * qup(b1, av1, m, nn)
                                          for m in range(n + 1) for nn in range(n + 1)))

    cross = [qup(au1, v1, m, 0) + qup(ub1, av1, m, 0) for m in range(n + 1)]
    second = [qup(au1, v1, m, 0)
              + (qup(ub1, av1, m, 0) if second_term_uses_u_plus_b
                 else qup(u1, av1, m, 0))
              for m in range(n + 1)]
    u2b1 = [u1[m] + 2 * b1[m] for m in range(n + 1)]

    e1 = (-c2 * au1[0] * sum(v1[m] * cross[m] for m in range(n + 1))
          + c2 * av1[0] * sum(ub1[m] * second[m] for m in range(n + 1))
          + c2 * av1[0] * sum(u1[m] * qup(b1, av1, m, 0) for m in range(n + 1))
          + sp.Rational(1, 4) * c2 * sum(
              qmn(v1, au1, m, nn) * (qup(au1, v1, m, nn) + 2 * qup(ub1, av1, m, nn))
              for m in range(n + 1) for nn in range(n + 1))
          - sp.Rational(1, 4) * c2 * sum(
              qmn(u2b1, av1, m, nn) * qup(u1, av1, m, nn)
              for m in range(n + 1) for nn in range(n + 1)))
    return e0, et0, e1


def gen_density_cases(n_per_dim=30):
    random.seed(SEED + 1)
    rows = []
    for n in (2, 3):
        for _ in range(n_per_dim):
            def jet():
                return (dyadic(-1, 1, 16), [dyadic(-1, 1, 16) for _ in range(n + 1)])
            u, b, v, au, av = jet(), jet(), jet(), jet(), jet()
            sigma = dyadic(-4, 4, 16)

            def to_sp(j):
                val = sp.Rational(j[0].numerator, j[0].denominator)
                d1 = [sp.Rational(x.numerator, x.denominator) for x in j[1]]
                return (val, d1)

            e0, et0, e1 = density(to_sp(u), to_sp(b), to_sp(v), to_sp(au), to_sp(av),
                                  n, second_term_uses_u_plus_b=(n == 3))
            ghost = mp.e ** (-mp.atan(mp.mpf(sigma.numerator) / sigma.denominator))
            vals = [sp.N(e, 40) for e in (e0, et0, e1)]
            rows.append((n, u, b, v, au, av, sigma, vals, ghost))
    return rows


def write_density(rows, path):
    with open(path, "w") as f:
        f.write("// Generated by tests/oracle_gen/gen_oracles.py -- do not edit.\n")
        f.write("// Modified-energy densities on random dyadic jets; the 3D rows use\n")
        f.write("// the u+background variant of the second cross term, the 2D rows the\n")
        f.write("// u-only variant, matching the per-dimension implementation.\n")
        f.write("static const DensityOracleCase kDensityOracleCases[] = {\n")
        for (n, u, b, v, au, av, sigma, vals, ghost) in rows:
            e0, et0, e1 = vals

            def jet_str(j):
                d1 = [float(x) for x in j[1]] + [0.0] * (3 - n)
                return "%s, {%s}" % (fmt(float(j[0])),
                                     ", ".join(fmt(x) for x in d1))

            f.write("  {%d, %s,\n   %s,\n   %s,\n   %s,\n   %s,\n" %
                    (n, jet_str(u), jet_str(b), jet_str(v), jet_str(au), jet_str(av)))
            f.write("   %s, %s, %s, %s, %s},\n" %
                    (fmt(float(sigma)), fmt(e0), fmt(et0), fmt(e1), fmt(ghost)))
        f.write("};\n")


# ---------------------------------------------------------------------------
# Norm oracles for f(x) = (1 - |x|^2)^6 on the 3D unit ball.
#
# Sum over the six distinct second-order multi-indices of the L1 norms of
# d^a f.  Mixed partials reduce to a product of 1D integrals; the pure ones
# change sign inside the ball and are integrated with a split at the root.

def w21_ball6_3d():
    r, c = sp.symbols("r c", positive=True)
    # d_x d_y f = 120 x y (1-r^2)^4 ; |.| integrates to a product.
    radial = sp.integrate(r ** 4 * (1 - r ** 2) ** 4 * r ** 2 / r ** 2, (r, 0, 1))
    # azimuthal/polar factor: integral of |xhat yhat| over the unit sphere
    ang = sp.Rational(4, 3) * 2  # int sin^3 = 4/3, int |cos sin| over 2pi = 2
    off = 120 * radial * ang  # one mixed multi-index
    off3 = 3 * off

    # d_x^2 f = -12(1-r^2)^5 + 120 x^2 (1-r^2)^4 ; sphere integral via the
    # cosine c of the angle against the x-axis.
    def diag_integrand(rr):
        def inner(cc):
            val = -12 * (1 - rr ** 2) ** 5 + 120 * rr ** 2 * cc ** 2 * (1 - rr ** 2) ** 4
            return abs(val)
        c0sq = (1 - rr ** 2) / (10 * rr ** 2) if rr > 0 else mp.inf
        if c0sq < 1:
            c0 = mp.sqrt(c0sq)
            iv = mp.quad(inner, [0, c0, 1])
        else:
            iv = mp.quad(inner, [0, 1])
        return 2 * mp.pi * 2 * iv * rr ** 2  # 2pi azimuth, x2 for c<0

    diag = mp.quad(diag_integrand, [0, 1 / mp.sqrt(11), 1])
    total = 3 * diag + mp.mpf(sp.N(off3, 40))
    return total


def lp1_poly4_2d():
    # integral of (1-r^2)^4 over the unit disc = pi/5
    r = sp.symbols("r", positive=True)
    return sp.N(2 * sp.pi * sp.integrate((1 - r ** 2) ** 4 * r, (r, 0, 1)), 40)


def write_norms(path):
    w21 = w21_ball6_3d()
    lp1 = lp1_poly4_2d()
    with open(path, "w") as f:
        f.write("// Generated by tests/oracle_gen/gen_oracles.py -- do not edit.\n")
        f.write("// High-precision reference values for norm quadrature tests.\n")
        f.write("// Sum over the six second-order multi-indices of the L1 norms of\n")
        f.write("// the partials of (1-|x|^2)^6 on the 3D unit ball:\n")
        f.write("static const double kW21Ball6_3d = %s;\n" % fmt(w21))
        f.write("// Integral of (1-|x|^2)^4 over the 2D unit disc (= pi/5):\n")
        f.write("static const double kL1Poly4_2d = %s;\n" % fmt(lp1))


def main():
    write_rhs(gen_rhs_cases(), f"{OUT_DIR}/rhs_oracle_data.inc")
    write_density(gen_density_cases(), f"{OUT_DIR}/density_oracle_data.inc")
    write_norms(f"{OUT_DIR}/norm_oracle_data.inc")
    print("oracle tables written to", OUT_DIR)


if __name__ == "__main__":
    main()
