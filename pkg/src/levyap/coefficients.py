"""Quasi-periodic coefficient sets with certified bounds.

Time dependence enters the model only through *signals*: arithmetic
expressions over oscillators ``cos(w_i t)`` and ``sin(w_i t)`` with a
finite frequency basis.  Signals are parsed from a small expression
language (see ``docs/grammar.md``), evaluated vectorized, and bounded by
interval arithmetic over the expression tree, which certifies in
particular that denominators stay away from zero, hence that every
coefficient is bounded uniformly in time.

A coefficient map (drift, diffusion, small-jump, large-jump) is a sum of
*terms*; each term is ``scale * outer(t) * kernel(y[coord], inner(t), x)``
with the state nonlinearity drawn from a fixed catalog of kernels with
known Lipschitz constants.  Mark dependence is restricted to an affine
factor ``w . x``, which keeps jump compensators in closed form through
the mark means of the noise spec.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .noise import LevyProcessSpec

__all__ = [
    "SignalParseError",
    "UnboundedSignalError",
    "CoefficientError",
    "QuasiPeriodicSignal",
    "CoefficientTerm",
    "CoefficientSet",
    "KERNELS",
    "eval_drift",
    "eval_diffusion",
    "eval_jump_small",
    "eval_jump_large",
    "small_jump_compensator",
    "verify_lipschitz",
    "LipschitzReport",
    "scan_almost_periods",
    "AlmostPeriodScan",
    "example41_coefficients",
    "ou_forced_coefficients",
    "galerkin_heat_coefficients",
]

Number = Union[int, float, Fraction]


class SignalParseError(ValueError):
    """Raised on malformed signal expressions."""


class UnboundedSignalError(ValueError):
    """Raised when the interval certificate cannot bound a signal."""


class CoefficientError(ValueError):
    """Raised when a coefficient set is inconsistent."""


# ---------------------------------------------------------------------------
# signal expressions
# ---------------------------------------------------------------------------

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class _Num:
    value: float


@dataclass(frozen=True)
class _Osc:
    fn: str  # "cos" | "sin"
    slot: int  # 0-based frequency index


@dataclass(frozen=True)
class _Neg:
    arg: object


@dataclass(frozen=True)
class _Fun:
    fn: str  # "cos" | "sin"
    arg: object


@dataclass(frozen=True)
class _Bin:
    op: str  # + - * /
    lhs: object
    rhs: object


def _eval_expr(node, t: np.ndarray, freqs: tuple[float, ...]) -> np.ndarray:
    if isinstance(node, _Num):
        return np.full_like(t, node.value, dtype=float)
    if isinstance(node, _Osc):
        f = np.cos if node.fn == "cos" else np.sin
        return f(freqs[node.slot] * t)
    if isinstance(node, _Neg):
        return -_eval_expr(node.arg, t, freqs)
    if isinstance(node, _Fun):
        f = np.cos if node.fn == "cos" else np.sin
        return f(_eval_expr(node.arg, t, freqs))
    if isinstance(node, _Bin):
        a = _eval_expr(node.lhs, t, freqs)
        b = _eval_expr(node.rhs, t, freqs)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    raise SignalParseError(f"unknown expression node {node!r}")


def _trig_interval(fn: str, lo: float, hi: float) -> tuple[float, float]:
    """Exact range of sin or cos over the interval [lo, hi]."""
    if hi - lo >= _TWO_PI:
        return -1.0, 1.0
    f = math.cos if fn == "cos" else math.sin
    vals = [f(lo), f(hi)]
    # interior critical points: fn' = 0 at k*pi (cos) or pi/2 + k*pi (sin)
    offset = 0.0 if fn == "cos" else math.pi / 2.0
    k = math.ceil((lo - offset) / math.pi)
    while offset + k * math.pi <= hi:
        vals.append(f(offset + k * math.pi))
        k += 1
    return min(vals), max(vals)


def _interval(node) -> tuple[float, float]:
    if isinstance(node, _Num):
        return node.value, node.value
    if isinstance(node, _Osc):
        return -1.0, 1.0
    if isinstance(node, _Neg):
        lo, hi = _interval(node.arg)
        return -hi, -lo
    if isinstance(node, _Fun):
        lo, hi = _interval(node.arg)
        return _trig_interval(node.fn, lo, hi)
    if isinstance(node, _Bin):
        a0, a1 = _interval(node.lhs)
        b0, b1 = _interval(node.rhs)
        if node.op == "+":
            return a0 + b0, a1 + b1
        if node.op == "-":
            return a0 - b1, a1 - b0
        if node.op == "*":
            prods = (a0 * b0, a0 * b1, a1 * b0, a1 * b1)
            return min(prods), max(prods)
        if b0 <= 0.0 <= b1:
            raise UnboundedSignalError(
                f"denominator interval [{b0}, {b1}] contains zero"
            )
        recips = (a0 / b0, a0 / b1, a1 / b0, a1 / b1)
        return min(recips), max(recips)
    raise SignalParseError(f"unknown expression node {node!r}")


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?|\.\d+)"
    r"|(?P<osc>[cs]\d+)"
    r"|(?P<fun>sin|cos)"
    r"|(?P<op>[-+*/()]))"
)


def _tokenize(text: str) -> list[str]:
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SignalParseError(f"bad character at {text[pos:]!r}")
        tokens.append(m.group(m.lastgroup))
        pos = m.end()
    return tokens


class _Parser:
    """Recursive descent over: expr := term ((+|-) term)*,
    term := unary ((*|/) unary)*, unary := - unary | atom,
    atom := NUM | c<k> | s<k> | (sin|cos) ( expr ) | ( expr )."""

    def __init__(self, tokens: list[str], n_freqs: int):
        self.tokens = tokens
        self.pos = 0
        self.n_freqs = n_freqs

    def peek(self) -> Optional[str]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise SignalParseError("unexpected end of expression")
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.take()
        if got != tok:
            raise SignalParseError(f"expected {tok!r}, got {got!r}")

    def parse(self):
        node = self.expr()
        if self.peek() is not None:
            raise SignalParseError(f"trailing tokens from {self.peek()!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            node = _Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() in ("*", "/"):
            op = self.take()
            node = _Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.peek() == "-":
            self.take()
            return _Neg(self.unary())
        return self.atom()

    def atom(self):
        tok = self.take()
        if tok == "(":
            node = self.expr()
            self.expect(")")
            return node
        if tok in ("sin", "cos"):
            self.expect("(")
            node = self.expr()
            self.expect(")")
            return _Fun(tok, node)
        if re.fullmatch(r"[cs]\d+", tok):
            slot = int(tok[1:]) - 1
            if not (0 <= slot < self.n_freqs):
                raise SignalParseError(
                    f"oscillator {tok!r} has no frequency (have {self.n_freqs})"
                )
            return _Osc("cos" if tok[0] == "c" else "sin", slot)
        try:
            return _Num(float(tok))
        except ValueError:
            raise SignalParseError(f"unexpected token {tok!r}") from None


@dataclass(frozen=True)
class QuasiPeriodicSignal:
    """A bounded quasi-periodic scalar signal of time.

    ``frequencies`` lists the base frequencies; the expression refers to
    them as ``c1``/``s1`` (cos/sin of the first frequency) and so on.
    Construction certifies boundedness by interval arithmetic and raises
    UnboundedSignalError otherwise.
    """

    frequencies: tuple[float, ...]
    expr: object
    source: str

    @classmethod
    def parse(cls, text: str, frequencies: Sequence[float] = ()) -> "QuasiPeriodicSignal":
        freqs = tuple(float(w) for w in frequencies)
        for w in freqs:
            if not (math.isfinite(w) and w > 0):
                raise SignalParseError("frequencies must be finite and positive")
        node = _Parser(_tokenize(text), len(freqs)).parse()
        sig = cls(frequencies=freqs, expr=node, source=text)
        sig.bounds()  # certify now; raises UnboundedSignalError if not
        return sig

    @classmethod
    def constant(cls, value: float) -> "QuasiPeriodicSignal":
        return cls(frequencies=(), expr=_Num(float(value)), source=repr(float(value)))

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return _eval_expr(self.expr, t, self.frequencies)

    def bounds(self) -> tuple[float, float]:
        return _interval(self.expr)

    def sup_abs(self) -> float:
        lo, hi = self.bounds()
        return max(abs(lo), abs(hi))


# ---------------------------------------------------------------------------
# kernels and terms
# ---------------------------------------------------------------------------


def _k_const(y, aux):
    return np.ones_like(y)


def _k_linear(y, aux):
    return y


def _k_bounded_ratio(y, aux):
    return y / (1.0 + y * y)


def _k_sin_shift(y, aux):
    return np.sin(y + aux)


@dataclass(frozen=True)
class _Kernel:
    func: object
    lipschitz: float  # in y, uniform over aux
    needs_inner: bool


KERNELS: dict[str, _Kernel] = {
    "const": _Kernel(_k_const, 0.0, False),
    "linear": _Kernel(_k_linear, 1.0, False),
    "bounded_ratio": _Kernel(_k_bounded_ratio, 1.0, False),
    "sin_shift": _Kernel(_k_sin_shift, 1.0, True),
}


@dataclass(frozen=True)
class CoefficientTerm:
    """One additive term of a coefficient map.

    Value at (t, y, x):
        scale * outer(t) * kernel(y[coord], inner(t)) * (w . x if given).
    ``mark_weights`` is only meaningful for jump maps.
    """

    scale: float
    kernel: str
    coord: int = 0
    outer: Optional[QuasiPeriodicSignal] = None
    inner: Optional[QuasiPeriodicSignal] = None
    mark_weights: Optional[tuple[float, ...]] = None

    def sup_time_factor(self) -> float:
        return 1.0 if self.outer is None else self.outer.sup_abs()


VectorTerms = tuple[tuple[CoefficientTerm, ...], ...]  # indexed by output coord
MatrixTerms = tuple[tuple[tuple[CoefficientTerm, ...], ...], ...]  # row, column


@dataclass(frozen=True)
class CoefficientSet:
    """The four coefficient maps of the semilinear equation.

    ``lipschitz`` is the declared constant L entering the contraction
    conditions: an upper bound for the squared Lipschitz constants of the
    drift and diffusion and for the jump ones weighted by their intensity
    mass.  It may be a Fraction to keep condition checks exact.
    """

    dim_state: int
    dim_noise: int
    drift: VectorTerms
    diffusion: MatrixTerms
    jump_small: VectorTerms
    jump_large: VectorTerms
    lipschitz: Number

    def __post_init__(self):
        if len(self.drift) != self.dim_state:
            raise CoefficientError("drift needs one term tuple per state coordinate")
        if len(self.jump_small) != self.dim_state or len(self.jump_large) != self.dim_state:
            raise CoefficientError("jump maps need one term tuple per state coordinate")
        if len(self.diffusion) != self.dim_state or any(
            len(row) != self.dim_noise for row in self.diffusion
        ):
            raise CoefficientError("diffusion terms must form a dim_state x dim_noise grid")
        for term in self._all_terms():
            if term.kernel not in KERNELS:
                raise CoefficientError(f"unknown kernel {term.kernel!r}")
            if not (0 <= term.coord < self.dim_state):
                raise CoefficientError(f"kernel coordinate {term.coord} out of range")
            if KERNELS[term.kernel].needs_inner and term.inner is None:
                raise CoefficientError(f"kernel {term.kernel!r} needs an inner signal")
            if term.mark_weights is not None and len(term.mark_weights) != self.dim_noise:
                raise CoefficientError("mark weights must have the noise dimension")
        if not (float(self.lipschitz) > 0 and math.isfinite(float(self.lipschitz))):
            raise CoefficientError("declared Lipschitz constant must be positive")

    def _all_terms(self):
        for terms in self.drift + self.jump_small + self.jump_large:
            yield from terms
        for row in self.diffusion:
            for terms in row:
                yield from terms


def _eval_terms_grid(
    terms: tuple[CoefficientTerm, ...],
    ts: np.ndarray,
    y: np.ndarray,
    out: np.ndarray,
) -> None:
    """Accumulate term values into ``out``.

    ``ts`` has shape (n,); ``y`` has shape (n, m, d) (d = state dim) and
    ``out`` shape (n, m).  Mark factors are not allowed here.
    """
    for term in terms:
        if term.mark_weights is not None:
            raise CoefficientError("mark-dependent term evaluated without marks")
        kern = KERNELS[term.kernel]
        aux = term.inner(ts)[:, None] if term.inner is not None else 0.0
        val = kern.func(y[:, :, term.coord], aux)
        if term.outer is not None:
            val = val * term.outer(ts)[:, None]
        out += term.scale * val


def _eval_terms_events(
    terms: tuple[CoefficientTerm, ...],
    ts: np.ndarray,
    y: np.ndarray,
    x: np.ndarray,
    out: np.ndarray,
) -> None:
    """Accumulate term values at jump events: all arguments per event."""
    for term in terms:
        kern = KERNELS[term.kernel]
        aux = term.inner(ts) if term.inner is not None else 0.0
        val = kern.func(y[:, term.coord], aux)
        if term.outer is not None:
            val = val * term.outer(ts)
        if term.mark_weights is not None:
            val = val * (x @ np.asarray(term.mark_weights))
        out += term.scale * val


def eval_drift(cs: CoefficientSet, ts, y) -> np.ndarray:
    """Drift map f(t, y).

    ``ts`` is a scalar or (n,) array; ``y`` is (m, d) for scalar time or
    (n, m, d).  Returns matching (m, d) or (n, m, d).
    """
    ts_arr, y_arr, scalar = _normalize_grid_args(ts, y)
    out = np.zeros(y_arr.shape[:2] + (cs.dim_state,))
    for i, terms in enumerate(cs.drift):
        _eval_terms_grid(terms, ts_arr, y_arr, out[:, :, i])
    return out[0] if scalar else out


def eval_diffusion(cs: CoefficientSet, ts, y) -> np.ndarray:
    """Diffusion map g(t, y), shape (..., dim_state, dim_noise)."""
    ts_arr, y_arr, scalar = _normalize_grid_args(ts, y)
    out = np.zeros(y_arr.shape[:2] + (cs.dim_state, cs.dim_noise))
    for i, row in enumerate(cs.diffusion):
        for j, terms in enumerate(row):
            _eval_terms_grid(terms, ts_arr, y_arr, out[:, :, i, j])
    return out[0] if scalar else out


def eval_jump_small(cs: CoefficientSet, ts, y, x) -> np.ndarray:
    """Small-jump integrand F(t, y, x) evaluated per event."""
    return _eval_jump(cs.jump_small, cs.dim_state, ts, y, x)


def eval_jump_large(cs: CoefficientSet, ts, y, x) -> np.ndarray:
    """Large-jump integrand G(t, y, x) evaluated per event."""
    return _eval_jump(cs.jump_large, cs.dim_state, ts, y, x)


def _eval_jump(tmap: VectorTerms, d: int, ts, y, x) -> np.ndarray:
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    out = np.zeros((len(ts), d))
    for i, terms in enumerate(tmap):
        _eval_terms_events(terms, ts, y, x, out[:, i])
    return out


def small_jump_compensator(
    cs: CoefficientSet, spec: LevyProcessSpec, ts, y
) -> np.ndarray:
    """The compensator drift of the small-jump integral:
    the integral of F(t, y, x) against the small-jump intensity.

    Exact for the kernel catalog because mark dependence is affine: terms
    without mark weights contribute rate * term, mark-linear terms
    contribute rate * (w . mean mark) * term.
    """
    ts_arr, y_arr, scalar = _normalize_grid_args(ts, y)
    out = np.zeros(y_arr.shape[:2] + (cs.dim_state,))
    smalls = [c for c in spec.jumps if c.region == "small"]
    if smalls:
        total_rate = sum(c.rate for c in smalls)
        for i, terms in enumerate(cs.jump_small):
            for term in terms:
                if term.mark_weights is None:
                    weight = total_rate
                else:
                    w = np.asarray(term.mark_weights)
                    weight = sum(c.rate * float(c.marks.mean() @ w) for c in smalls)
                if weight == 0.0:
                    continue
                scaled = CoefficientTerm(
                    scale=term.scale * weight,
                    kernel=term.kernel,
                    coord=term.coord,
                    outer=term.outer,
                    inner=term.inner,
                )
                _eval_terms_grid((scaled,), ts_arr, y_arr, out[:, :, i])
    return out[0] if scalar else out


def _normalize_grid_args(ts, y):
    ts_arr = np.asarray(ts, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    scalar = ts_arr.ndim == 0
    if scalar:
        ts_arr = ts_arr[None]
        y_arr = y_arr[None]
    if y_arr.ndim != 3 or len(y_arr) != len(ts_arr):
        raise CoefficientError(
            f"expected y with shape (n_times, n_paths, dim), got {y_arr.shape}"
        )
    return ts_arr, y_arr, scalar


# ---------------------------------------------------------------------------
# Lipschitz verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LipschitzReport:
    """Empirical Lipschitz check of a coefficient set against its
    declared constant.  Jump maps are weighted by their intensity mass,
    matching how the constant enters the contraction conditions."""

    declared: float
    observed: dict
    slack: float
    passed: bool
    n_samples: int

    def as_dict(self) -> dict:
        return {
            "declared": self.declared,
            "observed": dict(self.observed),
            "slack": self.slack,
            "passed": self.passed,
            "n_samples": self.n_samples,
        }


def verify_lipschitz(
    cs: CoefficientSet,
    spec: LevyProcessSpec,
    n_samples: int = 2000,
    box: float = 3.0,
    seed: int = 0,
    slack: float = 1.05,
) -> LipschitzReport:
    """Sample squared difference ratios of all four maps and compare with
    the declared constant.

    Drift and diffusion are checked as ||map(t,y)-map(t,z)||^2 / ||y-z||^2
    (Frobenius norm for the diffusion).  Jump maps are checked in the
    intensity-weighted form sum_c rate_c E_c ||F(t,y,X)-F(t,z,X)||^2 with
    mark expectations by quadrature.  Requires n_samples >= 100.
    """
    if n_samples < 100:
        raise CoefficientError("need at least 100 samples for a meaningful check")
    gen = np.random.default_rng(seed)
    ts = gen.uniform(-50.0, 50.0, size=n_samples)
    ya = gen.uniform(-box, box, size=(n_samples, cs.dim_state))
    yb = gen.uniform(-box, box, size=(n_samples, cs.dim_state))
    dy2 = np.sum((ya - yb) ** 2, axis=1)
    keep = dy2 > 1e-12
    ts, ya, yb, dy2 = ts[keep], ya[keep], yb[keep], dy2[keep]

    ya3, yb3 = ya[:, None, :], yb[:, None, :]
    df = eval_drift(cs, ts, ya3)[:, 0, :] - eval_drift(cs, ts, yb3)[:, 0, :]
    ratio_f = float(np.max(np.sum(df**2, axis=1) / dy2))
    dg = eval_diffusion(cs, ts, ya3)[:, 0] - eval_diffusion(cs, ts, yb3)[:, 0]
    ratio_g = float(np.max(np.sum(dg**2, axis=(1, 2)) / dy2))

    def jump_ratio(tmap: VectorTerms, region: str) -> float:
        comps = [c for c in spec.jumps if c.region == region]
        if not comps or all(len(t) == 0 for t in tmap):
            return 0.0
        acc = np.zeros(len(ts))
        for comp in comps:
            pts, wts = comp.marks.nodes()
            for xi, wi in zip(pts, wts):
                x_rep = np.tile(xi, (len(ts), 1))
                d = _eval_jump(tmap, cs.dim_state, ts, ya, x_rep) - _eval_jump(
                    tmap, cs.dim_state, ts, yb, x_rep
                )
                acc += comp.rate * wi * np.sum(d**2, axis=1)
        return float(np.max(acc / dy2))

    observed = {
        "drift": ratio_f,
        "diffusion": ratio_g,
        "jump_small": jump_ratio(cs.jump_small, "small"),
        "jump_large": jump_ratio(cs.jump_large, "large"),
    }
    declared = float(cs.lipschitz)
    passed = all(v <= declared * slack for v in observed.values())
    return LipschitzReport(
        declared=declared,
        observed=observed,
        slack=slack,
        passed=passed,
        n_samples=int(np.sum(keep)),
    )


# ---------------------------------------------------------------------------
# almost periods of signals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlmostPeriodScan:
    """Result of a deterministic almost-period scan of a signal."""

    taus: np.ndarray
    deviations: np.ndarray
    eps: float
    grid_step: float
    max_gap: float
    message: str

    def as_dict(self) -> dict:
        return {
            "taus": self.taus.tolist(),
            "deviations": self.deviations.tolist(),
            "eps": self.eps,
            "grid_step": self.grid_step,
            "max_gap": self.max_gap,
            "message": self.message,
        }


def scan_almost_periods(
    signal: QuasiPeriodicSignal,
    eps: float,
    horizon: float,
    grid_step: float,
    t_span: Optional[float] = None,
) -> AlmostPeriodScan:
    """Find all shifts tau in (0, horizon] with
    sup over the t-grid of |signal(t + tau) - signal(t)| <= eps.

    The supremum runs over a grid of span ``t_span`` (default: four
    periods of the slowest oscillator, at least 20).  Reports the largest
    gap between consecutive accepted shifts, with the origin counted as
    an accepted shift; an empty result carries an explanatory message and
    an infinite gap instead of raising.
    """
    if eps <= 0 or horizon <= 0 or grid_step <= 0:
        raise ValueError("eps, horizon and grid_step must be positive")
    if t_span is None:
        if signal.frequencies:
            t_span = max(20.0, 4.0 * _TWO_PI / min(signal.frequencies))
        else:
            t_span = 20.0
    n_t = int(round(t_span / grid_step)) + 1
    n_tau = int(round(horizon / grid_step))
    master = signal(np.arange(n_t + n_tau) * grid_step)
    base = master[:n_t]
    taus = np.arange(1, n_tau + 1) * grid_step
    deviations = np.empty(n_tau)
    chunk = max(1, int(2_000_000 / max(n_t, 1)))
    for start in range(0, n_tau, chunk):
        stop = min(start + chunk, n_tau)
        idx = np.arange(start + 1, stop + 1)
        windows = master[idx[:, None] + np.arange(n_t)[None, :]]
        deviations[start:stop] = np.abs(windows - base[None, :]).max(axis=1)
    accepted = deviations <= eps
    taus_ok = taus[accepted]
    if len(taus_ok) == 0:
        return AlmostPeriodScan(
            taus=taus_ok,
            deviations=deviations[accepted],
            eps=eps,
            grid_step=grid_step,
            max_gap=float("inf"),
            message="not almost periodic at this resolution and epsilon",
        )
    gaps = np.diff(np.concatenate([[0.0], taus_ok]))
    return AlmostPeriodScan(
        taus=taus_ok,
        deviations=deviations[accepted],
        eps=eps,
        grid_step=grid_step,
        max_gap=float(gaps.max()),
        message="",
    )


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def example41_coefficients() -> CoefficientSet:
    """Two-dimensional benchmark set over the frequency basis
    (sqrt 2, sqrt 3, sqrt 5), acting on the second state coordinate only.

    Drift: (cos(w1 t) + sin(w2 t)) / (17 + cos(w3 t)) * y2/(1 + y2^2).
    Diffusion: sin(y2 + cos(w2 t) + cos(w1 t)) / 12.
    Small jumps: y2 / 10.  Large jumps:
    y2/9 * sin(w2 t)^2 / (3 + cos(w1 t) + cos(w3 t)).
    Squared Lipschitz bound 1/64, kept exact as a Fraction.
    """
    freqs = (math.sqrt(2.0), math.sqrt(3.0), math.sqrt(5.0))
    none: tuple[CoefficientTerm, ...] = ()
    f_sig = QuasiPeriodicSignal.parse("(c1 + s2) / (17 + c3)", freqs)
    g_inner = QuasiPeriodicSignal.parse("c2 + c1", freqs)
    big_sig = QuasiPeriodicSignal.parse("s2 * s2 / (3 + c1 + c3)", freqs)
    return CoefficientSet(
        dim_state=2,
        dim_noise=1,
        drift=(
            none,
            (CoefficientTerm(1.0, "bounded_ratio", coord=1, outer=f_sig),),
        ),
        diffusion=(
            (none,),
            ((CoefficientTerm(1.0 / 12.0, "sin_shift", coord=1, inner=g_inner),),),
        ),
        jump_small=(none, (CoefficientTerm(0.1, "linear", coord=1),)),
        jump_large=(none, (CoefficientTerm(1.0 / 9.0, "linear", coord=1, outer=big_sig),)),
        lipschitz=Fraction(1, 64),
    )


def ou_forced_coefficients(amplitude: float = 1.0, sigma: float = 0.3) -> CoefficientSet:
    """Scalar Ornstein-Uhlenbeck benchmark: constant-in-state drift
    amplitude * sin(sqrt(2) t), constant diffusion sigma, no jumps.

    All maps are constant in the state, so any positive constant bounds
    their Lipschitz ratios; a tiny rational is declared to keep condition
    checks well posed.
    """
    forcing = QuasiPeriodicSignal.parse("s1", (math.sqrt(2.0),))
    return CoefficientSet(
        dim_state=1,
        dim_noise=1,
        drift=((CoefficientTerm(float(amplitude), "const", outer=forcing),),),
        diffusion=(((CoefficientTerm(float(sigma), "const"),),),),
        jump_small=((),),
        jump_large=((),),
        lipschitz=Fraction(1, 10**6),
    )


def galerkin_heat_coefficients(
    n_modes: int = 8,
    forcing_scale: float = 0.125,
    diffusion_scale: float = 0.05,
    jump_scale: float = 0.125,
) -> CoefficientSet:
    """Spectral truncation of a forced heat-type equation.

    Mode k gets a quasi-periodic forcing of size forcing_scale/(k+1)^2, a
    diagonal constant diffusion of size diffusion_scale/(k+1)^2 and a
    linear small-jump map of size jump_scale/(k+1)^2 on the first mode
    block.  The decay in k mimics a smooth right-hand side.  Squared
    Lipschitz bound: forcing and jump scales are at most 1/8, so 1/64.
    """
    if n_modes < 2:
        raise CoefficientError("need at least two modes")
    if not (0 < forcing_scale <= 0.125 and 0 <= jump_scale <= 0.125):
        raise CoefficientError("scales above 1/8 void the declared Lipschitz bound")
    freqs = (math.sqrt(2.0), math.sqrt(3.0))
    sig_f = QuasiPeriodicSignal.parse("s1", freqs)
    sig_f2 = QuasiPeriodicSignal.parse("c2", freqs)
    drift = []
    diffusion = []
    jump_small = []
    for k in range(n_modes):
        decay = 1.0 / (k + 1) ** 2
        outer = sig_f if k % 2 == 0 else sig_f2
        drift.append(
            (CoefficientTerm(forcing_scale * decay, "bounded_ratio", coord=k, outer=outer),)
        )
        row = [() for _ in range(n_modes)]
        row[k] = (CoefficientTerm(diffusion_scale * decay, "const"),)
        diffusion.append(tuple(row))
        jump_small.append((CoefficientTerm(jump_scale * decay, "linear", coord=k),))
    return CoefficientSet(
        dim_state=n_modes,
        dim_noise=n_modes,
        drift=tuple(drift),
        diffusion=tuple(diffusion),
        jump_small=tuple(jump_small),
        jump_large=tuple(() for _ in range(n_modes)),
        lipschitz=Fraction(1, 64),
    )
