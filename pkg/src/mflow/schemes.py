"""Exact-rational scheme tables, weight matrices, and consistency-order analysis.

A scheme advances a gradient flow by solving N stage minimization problems per
time step, each stage penalizing squared distance to a combination of the M
previous steps and the earlier stages.  All coefficient arithmetic here is
exact (``fractions.Fraction``): the shipped third-order table carries
denominators beyond 10**38, so floating point could not certify its order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction


def as_fraction(x) -> Fraction:
    """Coerce ints, 'num/den' strings, decimal strings, and Fractions."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        raise TypeError(
            f"refusing float coefficient {x!r}: pass an exact rational "
            "(int, Fraction, or 'num/den' string)")
    raise TypeError(f"cannot interpret {x!r} as an exact rational")


def format_rational(q: Fraction) -> str:
    """Serialize as 'num/den' (or plain integer when the denominator is 1)."""
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class SchemeCoefficients:
    """An M-step, N-stage table gamma[(i, j)] of exact rationals.

    Entries exist for stage i in 1..N against anchor j in -M+1..i-1; an
    absent entry is semantically zero (the diagonal table has structural
    zeros).  Row sums may be zero at construction time; operations that
    divide by them reject such schemes explicitly.
    """
    M: int
    N: int
    gamma: dict
    name: str = ""

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ValueError(f"need M >= 1 and N >= 1, got M={self.M}, N={self.N}")
        clean = {}
        for (i, j), v in self.gamma.items():
            if not (1 <= i <= self.N):
                raise ValueError(f"stage index {i} outside 1..{self.N}")
            if not (-self.M + 1 <= j <= i - 1):
                raise ValueError(
                    f"anchor index {j} outside {-self.M + 1}..{i - 1} for stage {i}")
            clean[(i, j)] = as_fraction(v)
        object.__setattr__(self, "gamma", clean)

    def gamma_at(self, i: int, j: int) -> Fraction:
        return self.gamma.get((i, j), Fraction(0))

    def row(self, i: int) -> dict:
        """Anchor -> coefficient map for stage i (nonzero entries only)."""
        return {j: v for (ii, j), v in self.gamma.items() if ii == i}

    def row_sum(self, i: int) -> Fraction:
        return sum(self.row(i).values(), Fraction(0))

    def anchor_range(self):
        return range(-self.M + 1, self.N + 1)


@dataclass(frozen=True)
class WeightMatrix:
    """Coefficients w[(i, j)] of the squared-distance terms in the stability
    inequality, lower-triangular (zero whenever i <= j).  ``L1``/``L2`` are
    set on the shifted variant."""
    M: int
    N: int
    entries: dict
    L1: Fraction = None
    L2: Fraction = None

    def at(self, i: int, j: int) -> Fraction:
        return self.entries.get((i, j), Fraction(0))

    def nonzero(self) -> dict:
        return {k: v for k, v in self.entries.items() if v != 0}


@dataclass(frozen=True)
class ConsistencyReport:
    """Auxiliary sequences a, b, c, d (exact rationals indexed -M+1..N) and
    the classified consistency order."""
    M: int
    N: int
    a: dict
    b: dict
    c: dict
    d: dict
    order: int


def weights(scheme: SchemeCoefficients) -> WeightMatrix:
    """w[(i, j)] = gamma[(i+1, j)] - gamma[(i, j)] for i > j, with the
    convention that rows 0 and N+1 of gamma are zero."""
    M, N = scheme.M, scheme.N

    def g(i, j):
        if 1 <= i <= N:
            return scheme.gamma_at(i, j)
        return Fraction(0)

    entries = {}
    for i in range(0, N + 1):
        for j in range(-M + 1, i):
            v = g(i + 1, j) - g(i, j)
            if v != 0:
                entries[(i, j)] = v
    return WeightMatrix(M=M, N=N, entries=entries)


def shifted_weights(scheme: SchemeCoefficients, L1, L2) -> WeightMatrix:
    """The weight matrix with w[(0, -1)] reduced by L1 and w[(N, 0)] raised by
    L2; the certificate for long-time energy boundedness checks this variant.

    The shifts may be given as rationals or as floats; a float is read as the
    decimal number it prints as (0.3 means 3/10)."""
    L1 = Fraction(str(L1)) if isinstance(L1, float) else as_fraction(L1)
    L2 = Fraction(str(L2)) if isinstance(L2, float) else as_fraction(L2)
    if scheme.M < 2:
        raise ValueError("shifted weights need M >= 2 (the (0, -1) entry must exist)")
    if not (0 <= L1 < L2):
        raise ValueError(f"need 0 <= L1 < L2, got L1={L1}, L2={L2}")
    w = weights(scheme)
    entries = dict(w.entries)
    entries[(0, -1)] = entries.get((0, -1), Fraction(0)) - L1
    entries[(scheme.N, 0)] = entries.get((scheme.N, 0), Fraction(0)) + L2
    entries = {k: v for k, v in entries.items() if v != 0}
    return WeightMatrix(M=scheme.M, N=scheme.N, entries=entries, L1=L1, L2=L2)


def consistency_vars(scheme: SchemeCoefficients) -> ConsistencyReport:
    """Run the order recurrences in exact arithmetic.

    Base values at j <= 0 encode the Taylor expansion of the exact flow at
    earlier times: a_j = j, b_j = j^2/2, c_j = d_j = j^3/6.  Each stage then
    satisfies a_i = (1 + sum_j gamma_ij a_j)/s_i and similarly for b, c, d,
    where s_i is the row sum.
    """
    M, N = scheme.M, scheme.N
    a = {j: Fraction(j) for j in range(-M + 1, 1)}
    b = {j: Fraction(j) ** 2 / 2 for j in range(-M + 1, 1)}
    c = {j: Fraction(j) ** 3 / 6 for j in range(-M + 1, 1)}
    d = {j: Fraction(j) ** 3 / 6 for j in range(-M + 1, 1)}
    for i in range(1, N + 1):
        row = scheme.row(i)
        s = sum(row.values(), Fraction(0))
        if s == 0:
            raise ValueError(
                f"scheme ill-posed for consistency analysis: row sum of stage {i} is zero")
        a[i] = (1 + sum(v * a[j] for j, v in row.items())) / s
        b[i] = (a[i] + sum(v * b[j] for j, v in row.items())) / s
        c[i] = (b[i] + sum(v * c[j] for j, v in row.items())) / s
        d[i] = (a[i] ** 2 / 2 + sum(v * d[j] for j, v in row.items())) / s
    report = ConsistencyReport(M=M, N=N, a=a, b=b, c=c, d=d, order=0)
    return ConsistencyReport(M=M, N=N, a=a, b=b, c=c, d=d,
                             order=classify_order(report))


def classify_order(report: ConsistencyReport) -> int:
    """Exact-rational order classification from the terminal stage values:
    3 needs a_N=1, b_N=1/2, c_N=1/6, d_N=1/6; 2 needs the first two; 1 needs
    a_N=1; otherwise 0.  No tolerances."""
    N = report.N
    aN, bN, cN, dN = report.a[N], report.b[N], report.c[N], report.d[N]
    if aN != 1:
        return 0
    if bN != Fraction(1, 2):
        return 1
    if cN == Fraction(1, 6) and dN == Fraction(1, 6):
        return 3
    return 2


F = Fraction

_BUILTIN = {}

_BUILTIN["backward_euler"] = SchemeCoefficients(
    M=1, N=1, gamma={(1, 0): F(1)}, name="backward_euler")

_BUILTIN["stage3_order2"] = SchemeCoefficients(
    M=1, N=3, name="stage3_order2", gamma={
        (1, 0): F(4),
        (2, 0): F(-1), (2, 1): F(5),
        (3, 0): F(-2), (3, 1): F(-8, 5), (3, 2): F(48, 5),
    })

_BUILTIN["diag7_order3"] = SchemeCoefficients(
    M=2, N=7, name="diag7_order3", gamma={
        (1, -1): F(1, 5), (1, 0): F(324, 25),
        (2, -1): F(-67, 100), (2, 0): F(16, 25), (2, 1): F(249, 20),
        (3, -1): F(-1, 100), (3, 0): F(-19, 25), (3, 2): F(1327, 100),
        (4, -1): F(13, 50), (4, 0): F(-71, 50), (4, 3): F(897, 100),
        (5, -1): F(1, 20), (5, 0): F(-31, 50), (5, 4): F(69, 10),
        (6, -1): F(6738642394659375271309286924642199204,
                   499724271717869165338634999114429476375),
        (6, 0): F(-1490348725590513376673846530372322969031,
                  999448543435738330677269998228858952750),
        (6, 5): F(33204424381521663791982510017718750000,
                  3997794173742953322709079992915435811),
        (7, -1): F(12657604782253956245795836543983271244969029,
                   68341222729403241230150248553811869282112250),
        (7, 0): F(-20148945983758481800702871507047428317759489,
                  34170611364701620615075124276905934641056125),
        (7, 6): F(384415962327102116281943490933129440840735787,
                  34170611364701620615075124276905934641056125),
    })


def builtin_scheme(name: str) -> SchemeCoefficients:
    """The shipped tables: 'backward_euler', 'stage3_order2' (single-step,
    3 stages, order 2), 'diag7_order3' (2-step, 7-stage diagonal, order 3)."""
    try:
        return _BUILTIN[name]
    except KeyError:
        raise ValueError(
            f"unknown scheme {name!r}; available: {sorted(_BUILTIN)}") from None


def builtin_scheme_names():
    return sorted(_BUILTIN)


def float_rows(scheme: SchemeCoefficients):
    """Per-stage [(anchor index, float coefficient)] lists for the stepping
    engine, in stage order."""
    return [(i, sorted(((j, float(v)) for j, v in scheme.row(i).items())))
            for i in range(1, scheme.N + 1)]


def write_scheme_file(scheme: SchemeCoefficients, path):
    """Scheme file format: JSON with integer fields M and N plus a list of
    (i, j, numerator, denominator) records."""
    records = [[i, j, v.numerator, v.denominator]
               for (i, j), v in sorted(scheme.gamma.items())]
    doc = {"M": scheme.M, "N": scheme.N, "gamma": records}
    if scheme.name:
        doc["name"] = scheme.name
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def read_scheme_file(path) -> SchemeCoefficients:
    with open(path) as f:
        doc = json.load(f)
    try:
        M, N, records = int(doc["M"]), int(doc["N"]), doc["gamma"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed scheme file {path}: {exc}") from None
    gamma = {}
    for rec in records:
        i, j, num, den = rec
        gamma[(int(i), int(j))] = Fraction(int(num), int(den))
    return SchemeCoefficients(M=M, N=N, gamma=gamma, name=str(doc.get("name", "")))
