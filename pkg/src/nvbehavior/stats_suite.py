"""Normality gate, paired / one-sample tests, omnibus tests and post-hocs.

Distribution tails come from the Cephes incomplete beta / gamma routines
exposed by :mod:`scipy.special`; the tests themselves are implemented here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import special
from scipy.stats import rankdata

from .data_model import PARTS

ALTERNATIVES = ("two-sided", "less", "greater")
EXACT_WILCOXON_MAX_N = 25


class DegenerateDataError(ValueError):
    """The data admit no meaningful test statistic (e.g. zero variance)."""


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    test_name: str
    statistic: float
    dof: tuple[float, ...] | None
    n: int
    p_value: float
    p_corrected: float
    alternative: str = "two-sided"
    exact: bool = False
    comparison: str = ""
    note: str = ""

    def corrected(self, m: int) -> "TestResult":
        return replace(self, p_corrected=bonferroni(self.p_value, m))


# -- distribution tails ------------------------------------------------------

def norm_sf(z: float) -> float:
    return float(special.ndtr(-z))


def norm_ppf(q):
    return special.ndtri(q)


def t_sf(t: float, df: float) -> float:
    """Upper tail P(T > t) of Student's t."""
    return float(special.stdtr(df, -t))


def f_sf(f: float, dfn: float, dfd: float) -> float:
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return float(special.fdtrc(dfn, dfd, f))


def chi2_sf(x: float, df: float) -> float:
    if x <= 0:
        return 1.0
    return float(special.chdtrc(df, x))


def _tail_p(stat: float, sf, alternative: str) -> float:
    """p-value of a statistic with a distribution symmetric about 0."""
    if alternative == "two-sided":
        return min(1.0, 2.0 * sf(abs(stat)))
    if alternative == "greater":
        return sf(stat)
    if alternative == "less":
        return sf(-stat)
    raise ValueError(f"unknown alternative {alternative!r}")


def bonferroni(p: float, m: int) -> float:
    if m < 1:
        raise ValueError("m must be >= 1")
    return min(1.0, m * p)


# -- Shapiro-Wilk (Royston 1992/1995) --------------------------------------

_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(coeffs, x):
    return sum(c * x ** i for i, c in enumerate(coeffs))


def shapiro_weights(n: int) -> np.ndarray:
    """Royston's approximation to the Shapiro-Wilk coefficients, ascending."""
    if n == 3:
        return np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    i = np.arange(1, n + 1)
    m = norm_ppf((i - 0.375) / (n + 0.25))
    ssq = float(np.dot(m, m))
    u = 1.0 / math.sqrt(n)
    a = np.empty(n)
    an = m[-1] / math.sqrt(ssq) + _poly(_C1, u)
    if n > 5:
        an1 = m[-2] / math.sqrt(ssq) + _poly(_C2, u)
        phi = (ssq - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (1 - 2 * an ** 2 - 2 * an1 ** 2)
        a[2:-2] = m[2:-2] / math.sqrt(phi)
        a[1], a[-2] = -an1, an1
    else:
        phi = (ssq - 2 * m[-1] ** 2) / (1 - 2 * an ** 2)
        a[1:-1] = m[1:-1] / math.sqrt(phi)
    a[0], a[-1] = -an, an
    return a


def shapiro_wilk(sample) -> TestResult:
    """Shapiro-Wilk W with Royston's normalizing transform for the p-value.

    Zero-variance samples return ``W = 1``, ``p = 0`` and a ``degenerate``
    note, so that a normality gate treats them as non-normal.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    x = x[np.isfinite(x)]
    n = x.size
    if not 3 <= n <= 5000:
        raise ValueError(f"Shapiro-Wilk needs 3 <= n <= 5000, got {n}")
    ss = float(np.sum((x - x.mean()) ** 2))
    if ss <= 0 or x[-1] - x[0] <= 0:
        return TestResult("shapiro_wilk", 1.0, None, n, 0.0, 0.0, note="degenerate: zero variance")
    a = shapiro_weights(n)
    w = float(np.dot(a, x) ** 2 / ss)
    w = min(w, 1.0)
    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        p = min(max(p, 0.0), 1.0)
    else:
        y = math.log(1.0 - w) if w < 1.0 else -math.inf
        if n <= 11:
            gamma = _poly(_G, n)
            if y >= gamma:
                p = 0.0
            else:
                y = -math.log(gamma - y)
                mu = _poly(_C3, n)
                sigma = math.exp(_poly(_C4, n))
                p = norm_sf((y - mu) / sigma)
        else:
            ln = math.log(n)
            mu = _poly(_C5, ln)
            sigma = math.exp(_poly(_C6, ln))
            p = norm_sf((y - mu) / sigma) if math.isfinite(y) else 1.0
    return TestResult("shapiro_wilk", w, None, n, p, p)


def is_normal(sample, alpha: float = 0.05) -> tuple[bool, TestResult | None]:
    """Normality gate.  Samples too small to test count as non-normal."""
    x = np.asarray(sample, dtype=float)
    x = x[np.isfinite(x)]
    if x.size < 3:
        return False, None
    res = shapiro_wilk(x)
    return res.p_value >= alpha, res


# -- t tests ---------------------------------------------------------------

def _pairwise_complete(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("paired samples differ in length")
    keep = np.isfinite(a) & np.isfinite(b)
    return a[keep], b[keep]


def one_sample_t(x, mu0: float = 0.0, alternative: str = "two-sided") -> TestResult:
    d = np.asarray(x, dtype=float)
    d = d[np.isfinite(d)] - mu0
    n = d.size
    if n < 2:
        raise ValueError("t test needs n >= 2")
    if np.all(d == 0):
        return TestResult("t", 0.0, (n - 1.0,), n, 1.0, 1.0, alternative)
    sd = float(np.std(d, ddof=1))
    if sd == 0:
        raise DegenerateDataError("zero variance with non-zero mean difference")
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    p = _tail_p(t, lambda s: t_sf(s, n - 1), alternative)
    return TestResult("t", t, (n - 1.0,), n, p, p, alternative)


def paired_t(a, b, alternative: str = "two-sided") -> TestResult:
    """Paired t test on ``a - b`` after pairwise deletion of missing values."""
    a, b = _pairwise_complete(a, b)
    res = one_sample_t(a - b, 0.0, alternative)
    return replace(res, test_name="paired_t")


# -- Wilcoxon signed-rank ----------------------------------------------------

def signed_rank_counts(doubled_ranks: Sequence[int]) -> list[int]:
    """Number of sign assignments giving each value of 2*W+.

    Equivalent to enumerating all 2**n sign patterns, computed by dynamic
    programming over the (integer) doubled ranks.
    """
    total = int(sum(doubled_ranks))
    counts = [0] * (total + 1)
    counts[0] = 1
    reach = 0
    for r in doubled_ranks:
        r = int(r)
        for s in range(reach, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
        reach += r
    return counts


def wilcoxon_signed_rank(x, y=None, mu0: float = 0.0, alternative: str = "two-sided",
                         exact: bool | None = None) -> TestResult:
    """Wilcoxon signed-rank test, paired (``x - y``) or one-sample (``x - mu0``).

    Zero differences are dropped and tied magnitudes share average ranks.
    For ``n <= 25`` the p-value is exact, counting sign assignments of the
    tied ranks; larger samples use the normal approximation with continuity
    and tie corrections.  ``statistic`` is ``min(W+, W-)``.
    """
    if alternative not in ALTERNATIVES:
        raise ValueError(f"unknown alternative {alternative!r}")
    if y is None:
        d = np.asarray(x, dtype=float)
        d = d[np.isfinite(d)] - mu0
        name = "wilcoxon_one_sample"
    else:
        a, b = _pairwise_complete(x, y)
        d = a - b
        name = "wilcoxon"
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise DegenerateDataError("all differences are zero")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    stat = min(w_plus, w_minus)
    use_exact = n <= EXACT_WILCOXON_MAX_N if exact is None else exact

    if use_exact:
        doubled = [int(round(2 * r)) for r in ranks]
        counts = signed_rank_counts(doubled)
        w2 = int(round(2 * w_plus))
        c_le = sum(counts[: w2 + 1])
        c_ge = sum(counts[w2:])
        total = 2 ** n
        if alternative == "two-sided":
            p = min(1.0, 2 * min(c_le, c_ge) / total)
        elif alternative == "greater":
            p = c_ge / total
        else:
            p = c_le / total
    else:
        mean = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
        sd = math.sqrt(var)
        dev = w_plus - mean
        if alternative == "two-sided":
            z = max(abs(dev) - 0.5, 0.0) / sd
            p = min(1.0, 2.0 * norm_sf(z))
        elif alternative == "greater":
            p = norm_sf((dev - 0.5) / sd)
        else:
            p = norm_sf(-(dev + 0.5) / sd)
    return TestResult(name, stat, None, n, p, p, alternative, use_exact)


# -- omnibus tests -----------------------------------------------------------

def _complete_rows(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ValueError("expected an n x k matrix")
    return m[np.all(np.isfinite(m), axis=1)]


def friedman(matrix) -> TestResult:
    """Friedman test on an ``n subjects x k conditions`` matrix.

    Rows with missing cells are dropped.  Ranks are averaged within rows and
    the statistic carries the usual tie correction.
    """
    m = _complete_rows(matrix)
    n, k = m.shape
    if k < 3:
        raise ValueError("Friedman test needs k >= 3 conditions")
    if n < 2:
        raise ValueError("Friedman test needs n >= 2 complete subjects")
    ranks = np.apply_along_axis(rankdata, 1, m)
    col = ranks.sum(axis=0)
    q = 12.0 * float(np.dot(col, col)) / (n * k * (k + 1)) - 3.0 * n * (k + 1)
    ties = 0.0
    for row in m:
        _, c = np.unique(row, return_counts=True)
        ties += float(np.sum(c ** 3 - c))
    denom = 1.0 - ties / (n * (k ** 3 - k))
    if denom <= 0:
        return TestResult("friedman", 0.0, (k - 1.0,), n, 1.0, 1.0, note="all values tied")
    q = max(q / denom, 0.0)
    p = chi2_sf(q, k - 1)
    return TestResult("friedman", q, (k - 1.0,), n, p, p)


def rm_anova_oneway(matrix) -> TestResult:
    """One-way repeated-measures ANOVA with subjects as blocks."""
    m = _complete_rows(matrix)
    n, k = m.shape
    if n < 2 or k < 2:
        raise ValueError("RM-ANOVA needs n >= 2 and k >= 2")
    grand = m.mean()
    ss_cond = n * float(np.sum((m.mean(axis=0) - grand) ** 2))
    ss_subj = k * float(np.sum((m.mean(axis=1) - grand) ** 2))
    ss_total = float(np.sum((m - grand) ** 2))
    ss_err = max(ss_total - ss_cond - ss_subj, 0.0)
    df1, df2 = k - 1.0, (k - 1.0) * (n - 1.0)
    scale = max(ss_total, 1e-300)
    if ss_err <= 1e-12 * scale:
        if ss_cond <= 1e-12 * scale:
            return TestResult("rm_anova", 0.0, (df1, df2), n, 1.0, 1.0, note="no variance")
        return TestResult("rm_anova", math.inf, (df1, df2), n, 0.0, 0.0,
                          note="degenerate: zero residual variance")
    f = (ss_cond / df1) / (ss_err / df2)
    p = f_sf(f, df1, df2)
    return TestResult("rm_anova", f, (df1, df2), n, p, p)


# -- part comparisons ----------------------------------------------------------

@dataclass(frozen=True)
class Design:
    """What to compare for one behavior.

    kind: ``"parts"`` (topics, omnibus plus post-hocs), ``"modes"`` (speaking
    vs listening) or ``"benchmark"`` (overall percentage vs ``benchmark``).
    routing: ``"auto"`` uses the Shapiro-Wilk gate; ``"parametric"`` and
    ``"nonparametric"`` force a family.  posthoc: ``"follow_omnibus"`` uses
    the omnibus family for post-hocs, ``"gate_each"`` gates every pair.
    """

    kind: str = "parts"
    benchmark: float = 75.0
    alternative: str = "less"
    routing: str = "auto"
    posthoc: str = "follow_omnibus"
    alpha: float = 0.05
    parts: tuple[str, ...] = PARTS

    def __post_init__(self):
        if self.kind not in ("parts", "modes", "benchmark"):
            raise ValueError(f"unknown design {self.kind!r}")
        if self.routing not in ("auto", "parametric", "nonparametric"):
            raise ValueError(f"unknown routing {self.routing!r}")
        if self.posthoc not in ("follow_omnibus", "gate_each"):
            raise ValueError(f"unknown posthoc rule {self.posthoc!r}")
        if self.alternative not in ALTERNATIVES:
            raise ValueError(f"unknown alternative {self.alternative!r}")


def _field(row, name):
    return row[name] if isinstance(row, Mapping) else getattr(row, name)


def _pivot(rows, behavior, source, cells):
    """participant -> [percentage per (part, mode) cell]."""
    table: dict[str, dict[tuple[str, str], float]] = {}
    for r in rows:
        if _field(r, "behavior") != behavior:
            continue
        if source is not None and _field(r, "source") != source:
            continue
        key = (_field(r, "part"), _field(r, "mode"))
        if key in cells:
            v = _field(r, "percentage")
            v = math.nan if v in ("", None) else float(v)
            table.setdefault(_field(r, "participant"), {})[key] = v
    pids = sorted(table)
    mat = np.array([[table[p].get(c, math.nan) for c in cells] for p in pids], dtype=float)
    return pids, mat.reshape(len(pids), len(cells))


def _parametric(routing: str, sample, alpha: float) -> tuple[bool, str]:
    if routing != "auto":
        return routing == "parametric", f"routing={routing}"
    ok, res = is_normal(sample, alpha)
    note = "shapiro n<3" if res is None else f"shapiro W={res.statistic:.4f} p={res.p_value:.4g}"
    return ok, note


def _safe(fn, *args, comparison: str, note: str, **kwargs) -> TestResult:
    try:
        res = fn(*args, **kwargs)
    except (DegenerateDataError, ValueError) as exc:
        return TestResult("skipped", math.nan, None, 0, math.nan, math.nan,
                          kwargs.get("alternative", "two-sided"), comparison=comparison,
                          note=f"{note}; {exc}")
    return replace(res, comparison=comparison, note="; ".join(s for s in (note, res.note) if s))


def _pair_test(a, b, parametric: bool, comparison: str, note: str) -> TestResult:
    if parametric:
        return _safe(paired_t, a, b, comparison=comparison, note=note)
    return _safe(wilcoxon_signed_rank, a, b, comparison=comparison, note=note)


def compare_parts(rows: Iterable, behavior: str, design: Design | str = "parts",
                  source: str | None = None) -> list[TestResult]:
    """Run the configured comparison on a long percent-time table.

    ``rows`` are mappings or objects with participant / behavior / source /
    part / mode / percentage.  Participants missing a needed cell are
    dropped for that test.
    """
    if isinstance(design, str):
        design = Design(kind=design)
    rows = list(rows)
    if source is None:
        sources = {_field(r, "source") for r in rows if _field(r, "behavior") == behavior}
        if len(sources) > 1:
            raise ValueError(f"several sources for {behavior}: {sorted(sources)}; pass source=")

    if design.kind == "modes":
        cells = [("all", "speaking"), ("all", "listening")]
        _, mat = _pivot(rows, behavior, source, cells)
        mat = _complete_rows(mat) if mat.size else mat
        if mat.shape[0] < 2:
            raise ValueError("fewer than 2 complete participants")
        par, note = _parametric(design.routing, mat[:, 0] - mat[:, 1], design.alpha)
        return [_pair_test(mat[:, 0], mat[:, 1], par, "speaking vs listening", note)]

    if design.kind == "benchmark":
        _, mat = _pivot(rows, behavior, source, [("all", "all")])
        x = mat[:, 0][np.isfinite(mat[:, 0])] if mat.size else np.empty(0)
        if x.size < 2:
            raise ValueError("fewer than 2 complete participants")
        par, note = _parametric(design.routing, x - design.benchmark, design.alpha)
        comp = f"overall vs {design.benchmark:g}"
        if par:
            res = _safe(one_sample_t, x, design.benchmark, alternative=design.alternative,
                        comparison=comp, note=note)
        else:
            res = _safe(wilcoxon_signed_rank, x, mu0=design.benchmark,
                        alternative=design.alternative, comparison=comp, note=note)
        return [res]

    cells = [(p, "all") for p in design.parts]
    _, mat = _pivot(rows, behavior, source, cells)
    mat = _complete_rows(mat) if mat.size else mat
    if mat.shape[0] < 2:
        raise ValueError("fewer than 2 complete participants")
    resid = mat - mat.mean(axis=1, keepdims=True) - mat.mean(axis=0, keepdims=True) + mat.mean()
    par, note = _parametric(design.routing, resid.ravel(), design.alpha)
    label = "omnibus " + "/".join(design.parts)
    if par:
        out = [_safe(rm_anova_oneway, mat, comparison=label, note=note)]
    else:
        out = [_safe(friedman, mat, comparison=label, note=note)]
    pairs = list(combinations(range(len(design.parts)), 2))
    m = len(pairs)
    for i, j in pairs:
        comp = f"{design.parts[i]} vs {design.parts[j]}"
        if design.posthoc == "gate_each":
            p_par, p_note = _parametric(design.routing, mat[:, i] - mat[:, j], design.alpha)
        else:
            p_par, p_note = par, f"follows omnibus ({'parametric' if par else 'nonparametric'})"
        res = _pair_test(mat[:, i], mat[:, j], p_par, comp, p_note)
        out.append(res.corrected(m) if math.isfinite(res.p_value) else res)
    return out
