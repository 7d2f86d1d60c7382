"""Real-analytic machinery: trigonometric approximation of rational step
functions, analytic shear maps replacing exact slides, sup norms over
complex strips, finite-stage conjugated rotations, and the search for
repetition counts that keep consecutive stages close in the strip metric.

Frequencies of every shear are exact multiples of its slide's period
divisor, so commutation with the relevant rotation is structural, not
approximate.  Everything else here is double precision with explicit
tolerances; the exact modules never depend on this one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .blockslide import BlockSlideMap, Slide, StepFunction, _lcm
from .params import StageParams, advance
from .towers import GridPermutation

TWO_PI = 2.0 * math.pi
_CHUNK = 1 << 14


class AnalyticError(ValueError):
    """Raised for ill-posed analytic requests."""


class RangeError(AnalyticError):
    """Raised when a complex evaluation leaves the floating range."""


class ApproximationBudgetError(AnalyticError):
    """Raised when the coefficient budget is exhausted; carries the error."""

    def __init__(self, message: str, achieved: float, harmonics: int):
        super().__init__(message)
        self.achieved = achieved
        self.harmonics = harmonics


@dataclass(frozen=True)
class TrigPolynomial:
    """a0 + sum_j (a_j cos(2 pi j N x) + b_j sin(2 pi j N x)); exactly
    1/N-periodic because every frequency is a multiple of N."""

    base_freq: int
    a0: float
    cos_coeffs: tuple[float, ...]
    sin_coeffs: tuple[float, ...]
    target_eps: float | None = None
    target_delta: float | None = None
    achieved_error: float | None = None

    def __post_init__(self) -> None:
        if self.base_freq < 1:
            raise AnalyticError("base frequency must be >= 1")
        if len(self.cos_coeffs) != len(self.sin_coeffs):
            raise AnalyticError("coefficient arrays must pair up")

    @property
    def harmonics(self) -> int:
        return len(self.cos_coeffs)

    def negated(self) -> "TrigPolynomial":
        return TrigPolynomial(self.base_freq, -self.a0,
                              tuple(-a for a in self.cos_coeffs),
                              tuple(-b for b in self.sin_coeffs),
                              self.target_eps, self.target_delta,
                              self.achieved_error)

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        """Evaluate at real or complex points (scalars or arrays).

        The real part of the phase is reduced modulo the period first, so
        periodicity holds to the last bit; values grow like
        exp(2 pi m N |Im x|) off the real line.  Harmonics are accumulated
        by exponential recurrence, so the cost is one vector multiply per
        harmonic.
        """
        arr = np.asarray(x)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        cplx = np.iscomplexobj(arr)
        out = np.empty(arr.shape, dtype=complex if cplx else float)
        m = self.harmonics
        if m == 0:
            out[...] = self.a0
        elif not cplx:
            flat = arr.ravel().astype(float)
            res = out.ravel()
            u = np.mod(flat * self.base_freq, 1.0)
            z = np.exp((TWO_PI * 1j) * u)
            ep = z.copy()
            acc = np.full(flat.shape, self.a0)
            for a_j, b_j in zip(self.cos_coeffs, self.sin_coeffs):
                acc += a_j * ep.real + b_j * ep.imag
                ep *= z
            res[:] = acc
        else:
            flat = arr.ravel().astype(complex)
            res = out.ravel()
            u = np.mod(flat.real * self.base_freq, 1.0) + 1j * (flat.imag * self.base_freq)
            with np.errstate(over="ignore", invalid="ignore"):
                zp = np.exp((TWO_PI * 1j) * u)
                zm = np.exp((-TWO_PI * 1j) * u)
                ep, em = zp.copy(), zm.copy()
                acc = np.full(flat.shape, complex(self.a0))
                for a_j, b_j in zip(self.cos_coeffs, self.sin_coeffs):
                    acc += (0.5 * a_j) * (ep + em) + (0.5j * b_j) * (em - ep)
                    ep *= zp
                    em *= zm
            res[:] = acc
        if cplx and not np.all(np.isfinite(out)):
            raise RangeError(
                f"complex evaluation overflowed (m={m}, N={self.base_freq})")
        return out[()] if scalar and not cplx else (out[0] if scalar else out)

    def to_json_dict(self) -> dict:
        return {
            "base_freq": self.base_freq,
            "a0": float(self.a0).hex(),
            "cos": [float(c).hex() for c in self.cos_coeffs],
            "sin": [float(c).hex() for c in self.sin_coeffs],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrigPolynomial":
        return cls(int(d["base_freq"]), float.fromhex(d["a0"]),
                   tuple(float.fromhex(c) for c in d["cos"]),
                   tuple(float.fromhex(c) for c in d["sin"]))


def complex_eval(tp: TrigPolynomial, z):
    """Analytic continuation of ``tp`` at complex points."""
    return tp.eval(np.asarray(z, dtype=complex))


def _bump_kernel(half_width: float, resolution: int) -> np.ndarray:
    """Discretized smooth bump supported on (-half_width, half_width)."""
    n = max(3, int(2 * half_width * resolution) | 1)
    t = np.linspace(-1.0, 1.0, n + 2)[1:-1]
    k = np.exp(-1.0 / np.maximum(1.0 - t * t, 1e-300))
    return k / k.sum()


def _sample_step(sf: StepFunction, grid: np.ndarray) -> np.ndarray:
    cuts = np.array([float(b) for b in sf.breakpoints])
    vals = np.array([float(v) for v in sf.values])
    idx = np.searchsorted(cuts, np.mod(grid, 1.0), side="right") - 1
    return vals[np.clip(idx, 0, len(vals) - 1)]


def grid_scale(sf: StepFunction, n: int) -> int:
    """Cells per period of the uniform grid carrying the breakpoints."""
    d = sf.break_denominator()
    d = _lcm(d, n)
    return d // n


def approximate_step(sf: StepFunction, n: int, eps: float, delta: float,
                     harmonics: int | None = None,
                     max_harmonics: int = 4096) -> TrigPolynomial:
    """Trig-polynomial approximation of a 1/n-periodic step function.

    Smooths with a compact bump (half-width delta/(2 k n) for the k-cell
    uniform grid of the period), takes the Fourier series of the smooth
    function by high-resolution quadrature, and doubles the truncation
    order until the sampled sup error outside the exceptional breakpoint
    intervals drops below ``eps``.  Passing ``harmonics`` pins the order
    instead (no error enforcement; the achieved error is recorded).
    """
    if eps <= 0 or delta <= 0:
        raise AnalyticError("eps and delta must be positive")
    if sf.period_divisor % n:
        raise AnalyticError(
            f"step function (period 1/{sf.period_divisor}) is not 1/{n}-periodic")
    if len(sf.values) == 1:  # constant: exact with no oscillation
        return TrigPolynomial(n, float(sf.values[0]), (), (), eps, delta, 0.0)
    kcells = grid_scale(sf, n)
    width = delta / (2.0 * kcells * n)

    def build(m: int) -> TrigPolynomial:
        res = max(4096, 16 * m, 8 * kcells)
        grid = (np.arange(res) + 0.5) / (res * n)
        raw = _sample_step(sf, grid)
        kern = _bump_kernel(width, res * n)
        pad = len(kern)
        ext = np.concatenate([raw[-pad:], raw, raw[:pad]])
        smooth = np.convolve(ext, kern, mode="same")[pad:-pad]
        coeff = np.fft.rfft(smooth) / res
        mm = min(m, len(coeff) - 1)
        a0 = float(coeff[0].real)
        ac = tuple(float(2.0 * coeff[j].real) for j in range(1, mm + 1))
        bs = tuple(float(-2.0 * coeff[j].imag) for j in range(1, mm + 1))
        return TrigPolynomial(n, a0, ac, bs, eps, delta, None)

    def sampled_error(tp: TrigPolynomial) -> float:
        xs = (np.arange(10000) + 0.5) / 10000.0
        cell = 1.0 / (kcells * n)
        dist = np.abs(xs / cell - np.round(xs / cell)) * cell
        mask = dist > width
        diff = np.abs(tp.eval(xs[mask]) - _sample_step(sf, xs[mask]))
        return float(diff.max())

    if harmonics is not None:
        tp = build(harmonics)
        return TrigPolynomial(n, tp.a0, tp.cos_coeffs, tp.sin_coeffs,
                              eps, delta, sampled_error(tp))
    m = 16
    best = None
    while m <= max_harmonics:
        tp = build(m)
        err = sampled_error(tp)
        if best is None or err < best[1]:
            best = (tp, err)
        if err < eps:
            return TrigPolynomial(n, tp.a0, tp.cos_coeffs, tp.sin_coeffs,
                                  eps, delta, err)
        m *= 2
    raise ApproximationBudgetError(
        f"could not reach eps={eps} within {max_harmonics} harmonics "
        f"(achieved {best[1]:.3g})", best[1], best[0].harmonics)


@dataclass(frozen=True)
class AnalyticStep:
    """One factor: a horizontal/vertical analytic shear, or an exact
    horizontal rotation."""

    kind: str  # "h" | "v" | "rot"
    poly: TrigPolynomial | None = None
    amount: Fraction | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("h", "v", "rot"):
            raise AnalyticError(f"unknown step kind {self.kind!r}")
        if self.kind == "rot" and self.amount is None:
            raise AnalyticError("rotation needs an amount")
        if self.kind in ("h", "v") and self.poly is None:
            raise AnalyticError("shear needs a polynomial")

    def inverse(self) -> "AnalyticStep":
        if self.kind == "rot":
            return AnalyticStep("rot", amount=-self.amount)
        return AnalyticStep(self.kind, poly=self.poly.negated())


@dataclass(frozen=True)
class AnalyticMap:
    """Composition of analytic steps, applied first to last.  Each shear
    has Jacobian one, so the composition preserves area structurally."""

    steps: tuple[AnalyticStep, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def then(self, other: "AnalyticMap") -> "AnalyticMap":
        return AnalyticMap(self.steps + other.steps)

    def inverse(self) -> "AnalyticMap":
        return AnalyticMap(tuple(s.inverse() for s in reversed(self.steps)))

    def apply(self, pts: np.ndarray, reduce: bool = False) -> np.ndarray:
        """Apply to an (n, 2) array of real or complex points.  The lift is
        evaluated; pass ``reduce=True`` to fold real points back into
        [0,1)^2 at the end."""
        pts = np.array(pts, dtype=complex if np.iscomplexobj(pts) else float,
                       copy=True)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        x, y = pts[:, 0].copy(), pts[:, 1].copy()
        for st in self.steps:
            if st.kind == "rot":
                x = x + float(st.amount)
            elif st.kind == "h":
                x = x + st.poly.eval(y)
            else:
                y = y + st.poly.eval(x)
        if reduce and not np.iscomplexobj(pts):
            x, y = np.mod(x, 1.0), np.mod(y, 1.0)
        out = np.stack([x, y], axis=1)
        return out[0] if single else out

    def displacement(self, pts: np.ndarray) -> np.ndarray:
        """Lift displacement f(z) - z; both coordinates are Z^2-periodic
        analytic functions."""
        pts = np.asarray(pts, dtype=complex if np.iscomplexobj(pts) else float)
        return self.apply(pts) - pts

    def to_json_list(self) -> list:
        out = []
        for st in self.steps:
            if st.kind == "rot":
                out.append({"kind": "rot", "amount": str(st.amount)})
            else:
                out.append({"kind": st.kind, **st.poly.to_json_dict()})
        return out

    @classmethod
    def from_json_list(cls, data: list) -> "AnalyticMap":
        steps = []
        for d in data:
            if d["kind"] == "rot":
                steps.append(AnalyticStep("rot", amount=Fraction(d["amount"])))
            else:
                steps.append(AnalyticStep(d["kind"],
                                          poly=TrigPolynomial.from_json_dict(d)))
        return cls(tuple(steps))


ANALYTIC_IDENTITY = AnalyticMap(())


def rotation_map(amount: Fraction) -> AnalyticMap:
    amount = Fraction(amount) % 1
    if amount == 0:
        return ANALYTIC_IDENTITY
    return AnalyticMap((AnalyticStep("rot", amount=amount),))


@dataclass(frozen=True)
class BlockSlideApprox:
    """An analytic stand-in for an exact slide map, plus its budgets."""

    map: AnalyticMap
    source: BlockSlideMap
    eps: float
    delta: float
    exceptional_mass_bound: float
    within_delta: bool
    shear_errors: tuple[float, ...]


def approx_blockslide(bs: BlockSlideMap, q: int, eps: float, delta: float,
                      harmonics: int | None = None,
                      max_harmonics: int = 4096) -> BlockSlideApprox:
    """Shear-for-slide replacement.  Vertical slides must carry a period
    divisor that is a multiple of q (with q > 1), which makes the analytic
    map commute with the 1/q rotation exactly, by frequency restriction.

    The budgets are split evenly across the slides.  When a per-slide
    breakpoint strip is too narrow for the coefficient budget, that slide's
    strip is widened (doubling) until the series converges; the reported
    exceptional-mass bound sums the strips actually used, and
    ``within_delta`` records whether it stayed below ``delta``.
    """
    n_var = sum(1 for sl in bs.steps if len(sl.step.values) > 1)
    per_eps = eps / max(n_var, 1)
    per_delta = delta / max(n_var, 1)
    steps = []
    errors = []
    mass = 0.0
    for sl in bs.steps:
        n = sl.step.period_divisor
        if len(sl.step.values) == 1:  # constants commute with everything
            poly = TrigPolynomial(max(n, 1), float(sl.step.values[0]), (), (),
                                  None, None, 0.0)
        elif sl.axis == "v" and q > 1 and n % q != 0:
            raise AnalyticError(
                f"vertical slide with period divisor {n} cannot commute "
                f"with the 1/{q} rotation")
        else:
            d_i = per_delta
            while True:
                try:
                    poly = approximate_step(sl.step, n, per_eps, d_i,
                                            harmonics=harmonics,
                                            max_harmonics=max_harmonics)
                    break
                except ApproximationBudgetError:
                    d_i *= 2.0
                    if d_i > 0.5:
                        raise
            mass += d_i
        errors.append(poly.achieved_error if poly.achieved_error is not None
                      else float("nan"))
        steps.append(AnalyticStep(sl.axis, poly=poly))
    return BlockSlideApprox(AnalyticMap(tuple(steps)), bs, eps, delta,
                            min(mass, 1.0), mass <= delta + 1e-12,
                            tuple(errors))


@dataclass(frozen=True)
class PermApprox:
    map: AnalyticMap
    blockslide: BlockSlideMap
    perm: GridPermutation
    eps: float
    good_fraction: float | None


def approx_permutation(perm: GridPermutation, eps: float,
                       harmonics: int | None = None,
                       samples: int = 0, seed: int = 0) -> PermApprox:
    """Decompose the grid permutation into slides, replace each slide by an
    analytic shear, and (optionally) Monte-Carlo estimate the mass of the
    set where the analytic map lands points in the correct target atom."""
    from .blockslide import permutation_to_blockslide
    bs = permutation_to_blockslide(perm)
    approx = approx_blockslide(bs, perm.q, eps=eps / 2.0, delta=eps / 2.0,
                               harmonics=harmonics)
    frac = None
    if samples > 0:
        frac = good_set_fraction(perm, bs, approx.map, samples, seed=seed)
    return PermApprox(approx.map, bs, perm, eps, frac)


def good_set_fraction(perm: GridPermutation, bs: BlockSlideMap,
                      am: AnalyticMap, samples: int, seed: int = 0) -> float:
    """Fraction of uniform sample points whose analytic image lies in the
    atom prescribed by the permutation (exact atoms via integer lattices)."""
    cols, rows = perm.k * perm.q, perm.s
    dc, dr = bs.lattice_denominators()
    scale = 1 << 18
    dx, dy = _lcm(dc, cols) * scale, _lcm(dr, rows) * scale
    rng = np.random.default_rng(seed)
    xi = rng.integers(0, dx, size=samples, dtype=np.int64)
    yi = rng.integers(0, dy, size=samples, dtype=np.int64)
    xo, yo = bs.apply_lattice(xi, yi, dx, dy)
    target_c = (xo * cols) // dx
    target_r = (yo * rows) // dy
    pts = np.stack([xi / dx, yi / dy], axis=1)
    img = am.apply(pts, reduce=True)
    got_c = np.floor(img[:, 0] * cols).astype(np.int64) % cols
    got_r = np.floor(img[:, 1] * rows).astype(np.int64) % rows
    return float(np.mean((got_c == target_c) & (got_r == target_r)))


# ---------------------------------------------------------------------------
# strip norms and the stage metric


@dataclass(frozen=True)
class StripNormEstimate:
    rho: float
    grid_density: int
    value: float
    attained_at: tuple[complex, complex]

    def to_json_dict(self) -> dict:
        return {"rho": self.rho, "grid_density": self.grid_density,
                "value": self.value,
                "attained_at": [repr(self.attained_at[0]),
                                repr(self.attained_at[1])]}


def _strip_samples(rho: float, grid: int) -> np.ndarray:
    t = np.arange(grid) / grid
    xs, ys = np.meshgrid(t, t, indexing="ij")
    base = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(complex)
    pts = []
    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            z = base.copy()
            z[:, 0] += 1j * sx * rho
            z[:, 1] += 1j * sy * rho
            pts.append(z)
    return np.concatenate(pts, axis=0)


def strip_half_distance(f: AnalyticMap, g: AnalyticMap, rho: float,
                        grid: int = 24) -> StripNormEstimate:
    """Sampled estimate of the one-sided strip distance: the larger, over
    the two coordinates, of the sup of |f_i - g_i + n| with the integer
    shift n minimized.  Sampling sits on the |Im| = rho faces, where the
    modulus of a trigonometric polynomial over the strip is attained; the
    estimate is a lower bound of the true sup and nondecreasing as the
    (power-of-two) grid refines.
    """
    z = _strip_samples(rho, grid)
    df = f.displacement(z)
    dg = g.displacement(z)
    value = -1.0
    where = (complex(0), complex(0))
    for i in (0, 1):
        diff = df[:, i] - dg[:, i]
        best = None
        for n in (-1.0, 0.0, 1.0):
            cand = np.abs(diff + n)
            peak = float(cand.max())
            if best is None or peak < best[0]:
                best = (peak, int(cand.argmax()))
        if best[0] > value:
            value = best[0]
            where = (complex(z[best[1], 0]), complex(z[best[1], 1]))
    return StripNormEstimate(rho=rho, grid_density=grid, value=value,
                             attained_at=where)


def strip_distance(f: AnalyticMap, g: AnalyticMap, rho: float,
                   grid: int = 24) -> StripNormEstimate:
    """Symmetrized strip metric estimate: max of the one-sided estimate and
    the same for the (closed-form) inverses."""
    fwd = strip_half_distance(f, g, rho, grid)
    bwd = strip_half_distance(f.inverse(), g.inverse(), rho, grid)
    return fwd if fwd.value >= bwd.value else bwd


# ---------------------------------------------------------------------------
# stage assembly


def stack_map(h_maps: Sequence[AnalyticMap]) -> AnalyticMap:
    """H = h_1 o h_2 o ... o h_n as a pipeline (h_n acts first)."""
    steps: tuple[AnalyticStep, ...] = ()
    for h in reversed(list(h_maps)):
        steps = steps + h.steps
    return AnalyticMap(steps)


def conjugated_rotation(h_maps: Sequence[AnalyticMap], alpha: Fraction) -> AnalyticMap:
    """T = H o R^alpha o H^(-1) with H as in :func:`stack_map`."""
    h = stack_map(h_maps)
    return h.inverse().then(rotation_map(alpha)).then(h)


@dataclass(frozen=True)
class AnalyticStage:
    params: StageParams
    h_map: AnalyticMap | None
    transform: AnalyticMap
    gap_from_previous: float | None


def build_stage(prev_stages: Sequence[AnalyticStage], h_next: AnalyticMap,
                params_next: StageParams, rho: float,
                grid: int = 24) -> AnalyticStage:
    """Assemble the next conjugated rotation and record its strip-metric
    gap from the previous stage."""
    h_maps = [st.h_map for st in prev_stages if st.h_map is not None]
    h_maps.append(h_next)
    transform = conjugated_rotation(h_maps, params_next.alpha)
    gap = strip_distance(transform, prev_stages[-1].transform, rho, grid).value
    return AnalyticStage(params_next, h_next, transform, gap)


@dataclass(frozen=True)
class LStarResult:
    found: bool
    l_star: int
    gap: float
    threshold: float
    history: tuple[tuple[int, float], ...]


def find_l_star(prev_stages: Sequence[AnalyticStage],
                candidates: Sequence[AnalyticMap], s_next: int,
                rho: float, eps_n: float, l_budget: int = 64,
                grid: int = 24) -> LStarResult:
    """Smallest repetition count l such that, for every candidate next
    tower map, the estimated strip gap between the current stage and the
    next stays below eps_n / 2.  The candidate maps do not depend on l;
    only the rotation number moves, so the scan is cheap."""
    if not candidates:
        raise AnalyticError("need at least one candidate tower map")
    prev = prev_stages[-1]
    threshold = eps_n / 2.0
    history = []
    best = None
    for l in range(2, l_budget + 1):
        par_next = advance(StageParams(prev.params.n, prev.params.k, l,
                                       prev.params.s, prev.params.p,
                                       prev.params.q),
                           k=2, l=2, s_next=s_next)
        worst = 0.0
        for h in candidates:
            try:
                st = build_stage(prev_stages, h, par_next, rho, grid)
                gap = st.gap_from_previous
            except RangeError:
                gap = float("inf")
            worst = max(worst, gap)
        history.append((l, worst))
        if best is None or worst < best[1]:
            best = (l, worst)
        if worst < threshold:
            return LStarResult(True, l, worst, threshold, tuple(history))
    return LStarResult(False, best[0], best[1], threshold, tuple(history))


# ---------------------------------------------------------------------------
# numerical sanity checks used by the verification pipeline


def jacobian_determinants(am: AnalyticMap, pts: np.ndarray,
                          h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian determinants at real points."""
    pts = np.asarray(pts, dtype=float)
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    fxp = am.apply(pts + ex)
    fxm = am.apply(pts - ex)
    fyp = am.apply(pts + ey)
    fym = am.apply(pts - ey)
    j11 = (fxp[:, 0] - fxm[:, 0]) / (2 * h)
    j21 = (fxp[:, 1] - fxm[:, 1]) / (2 * h)
    j12 = (fyp[:, 0] - fym[:, 0]) / (2 * h)
    j22 = (fyp[:, 1] - fym[:, 1]) / (2 * h)
    return j11 * j22 - j12 * j21


def commutation_residual(am: AnalyticMap, q: int, pts: np.ndarray) -> float:
    """Sampled sup of the wrap-aware distance between h(R^{1/q} x) and
    R^{1/q}(h(x)); structurally zero up to rounding for our maps."""
    pts = np.asarray(pts, dtype=float)
    shift = np.array([1.0 / q, 0.0])
    a = am.apply(pts + shift)
    b = am.apply(pts) + shift
    diff = a - b
    diff = diff - np.round(diff)
    return float(np.abs(diff).max())
