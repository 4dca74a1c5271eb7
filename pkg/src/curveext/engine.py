"""Oscillatory extension-operator evaluation at desk scale.

Computes T f(x) = integral of exp(i lambda x.gamma(t)) f(t) dt over panels
of Gauss-Legendre nodes sized to the oscillation budget, batched over
target points as dense complex matrix products.  Summation order is fixed
(node chunks combined by compensated addition per target), so results are
byte-identical regardless of worker partitioning.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .curves import CurveSpec, affine_weight, torsion

NODES_PER_WAVELENGTH = 10
PANEL_ORDER = 16
NODE_CHUNK = 8192
TARGET_BLOCK = 256
SELF_CHECK_STRIDE = 100
SELF_CHECK_TOL = 1e-6
GRADE_MIN_WIDTH = 1e-9

_GLX, _GLW = np.polynomial.legendre.leggauss(PANEL_ORDER)


class QuadratureBudgetError(RuntimeError):
    """Doubled-resolution self-check exceeded the declared tolerance."""


class SeparationError(ValueError):
    """Support separation precondition violated."""


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """Real-valued function on [0,1] with closed-form or quadrature norms.

    kind is one of "indicator", "bump", "trig", "zero".  Restriction to a
    subinterval is the `restrict` constructor (kept within the same type).
    """

    kind: str
    lo: float
    hi: float
    coeffs: tuple = ()
    label: str = ""

    @property
    def width(self):
        return max(self.hi - self.lo, 0.0)

    def breakpoints(self):
        return (self.lo, self.hi)

    def bandwidth(self):
        """Oscillation scale of the amplitude itself, rad per unit t."""
        if self.kind == "indicator" or self.kind == "zero":
            return 0.0
        if self.kind == "bump":
            return 20.0 / max(self.width, 1e-12)
        if self.kind == "trig":
            deg = (len(self.coeffs) - 1) // 2
            return 2.0 * math.pi * deg
        raise ValueError(self.kind)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        mask = (t >= self.lo) & (t <= self.hi)
        if self.kind == "zero" or self.width == 0.0:
            return np.zeros_like(t)
        if self.kind == "indicator":
            return mask.astype(float)
        if self.kind == "bump":
            u = 2.0 * (t - self.lo) / self.width - 1.0
            out = np.zeros_like(t)
            inner = mask & (np.abs(u) < 1.0)
            out[inner] = np.exp(1.0 - 1.0 / (1.0 - u[inner] ** 2))
            return out
        if self.kind == "trig":
            # coeffs = (a0, a1, b1, a2, b2, ...) over frequency 2*pi*k
            out = np.full_like(t, self.coeffs[0])
            for k in range(1, (len(self.coeffs) + 1) // 2):
                out += self.coeffs[2 * k - 1] * np.cos(2 * math.pi * k * t)
                if 2 * k < len(self.coeffs):
                    out += self.coeffs[2 * k] * np.sin(2 * math.pi * k * t)
            return np.where(mask, out, 0.0)
        raise ValueError(self.kind)

    def lp_norm(self, p):
        if self.kind == "zero" or self.width == 0.0:
            return 0.0
        if self.kind == "indicator":
            if p == math.inf:
                return 1.0
            return self.width ** (1.0 / p)
        # bump and trig: dense panel quadrature on the support
        n = max(int(self.bandwidth() * self.width * 4), 256)
        edges = np.linspace(self.lo, self.hi, n // PANEL_ORDER + 2)
        ts, ws = _panel_nodes(edges)
        vals = np.abs(self(ts))
        if p == math.inf:
            return float(np.max(vals))
        return float(np.sum(ws * vals ** p)) ** (1.0 / p)


def indicator(lo, hi):
    return TestFunction("indicator", float(lo), float(hi))


def bump(lo, hi):
    return TestFunction("bump", float(lo), float(hi))


def zero_function():
    return TestFunction("zero", 0.0, 0.0)


def trig_poly(seed, degree=64, lo=0.0, hi=1.0):
    rng = np.random.default_rng(seed)
    coeffs = tuple(rng.standard_normal(2 * degree + 1) / math.sqrt(2 * degree + 1))
    return TestFunction("trig", float(lo), float(hi), coeffs=coeffs,
                        label=f"trig(seed={seed}, degree={degree})")


def restrict(f, lo, hi):
    """f times the indicator of [lo, hi]."""
    nlo, nhi = max(f.lo, float(lo)), min(f.hi, float(hi))
    if nhi <= nlo:
        return zero_function()
    return TestFunction(f.kind, nlo, nhi, coeffs=f.coeffs, label=f.label)


def pullback(f, tau, h):
    """The reparametrized function s -> f(h s + tau).

    Exact for indicators and bumps (both are shape-invariant under affine
    reparametrization of their support); trigonometric test functions do
    not stay in the family and are rejected.
    """
    if f.kind == "zero":
        return zero_function()
    if f.kind not in ("indicator", "bump"):
        raise ValueError(f"pullback not closed for kind {f.kind!r}")
    return TestFunction(f.kind, (f.lo - tau) / h, (f.hi - tau) / h,
                        coeffs=f.coeffs, label=f.label)


# ---------------------------------------------------------------------------
# quadrature rules
# ---------------------------------------------------------------------------


def _panel_nodes(edges):
    mids = 0.5 * (edges[:-1] + edges[1:])
    halves = 0.5 * np.diff(edges)
    ts = (mids[:, None] + halves[:, None] * _GLX[None, :]).ravel()
    ws = (halves[:, None] * _GLW[None, :]).ravel()
    return ts, ws


def _graded_edges(lo, hi, base_width, grade_points, min_width=GRADE_MIN_WIDTH):
    """Panel edges on [lo, hi], geometric (ratio 2) toward each grade point."""
    cuts = {lo, hi}
    for p in grade_points:
        if lo < p < hi:
            cuts.add(float(p))
    segs = sorted(cuts)
    edges = [lo]
    for a, b in zip(segs[:-1], segs[1:]):
        sub = [a, b]
        # geometric refinement toward a graded endpoint
        for endpoint, mirror in ((a, False), (b, True)):
            if endpoint in grade_points or any(
                abs(endpoint - p) < 1e-15 for p in grade_points
            ):
                pts = []
                w = b - a
                while w / 2.0 > min_width:
                    w /= 2.0
                    pts.append(a + w if not mirror else b - w)
                sub.extend(pts)
        sub = sorted(set(sub))
        # uniform split of each piece to the oscillation budget
        for a2, b2 in zip(sub[:-1], sub[1:]):
            n = max(1, int(math.ceil((b2 - a2) / base_width)))
            edges.extend(np.linspace(a2, b2, n + 1)[1:])
    return np.asarray(sorted(set(edges)))


@dataclass(frozen=True)
class QuadratureRule:
    """Panelized nodes/weights for one support interval and oscillation budget."""

    nodes: np.ndarray
    weights: np.ndarray
    omega: float
    nodes_per_wavelength: float

    @property
    def n(self):
        return self.nodes.size


def build_rule(f, omega, nodes_per_wavelength=NODES_PER_WAVELENGTH,
               grade_points=()):
    """Rule over supp f resolving `omega` radians per unit t.

    Panel width keeps wavelengths-per-panel at PANEL_ORDER /
    nodes_per_wavelength; grade points get geometrically refined panels
    (weight singularities).
    """
    lo, hi = f.lo, f.hi
    if hi <= lo:
        return QuadratureRule(np.zeros(0), np.zeros(0), omega, nodes_per_wavelength)
    omega_tot = omega + f.bandwidth()
    base = (2.0 * math.pi / max(omega_tot, 1e-9)) * PANEL_ORDER / nodes_per_wavelength
    base = min(base, hi - lo)
    edges = _graded_edges(lo, hi, base, tuple(grade_points))
    ts, ws = _panel_nodes(edges)
    return QuadratureRule(ts, ws, omega_tot, nodes_per_wavelength)


def torsion_poly(curve):
    """Coefficients (low to high) of det(gamma', ..., gamma^(d)) as a polynomial."""
    d = curve.d
    cols = []
    for order in range(1, d + 1):
        col = []
        for c in curve.coeffs:
            dc = npoly.polyder(np.asarray(c, dtype=float), order)
            col.append(dc if dc.size else np.zeros(1))
        cols.append(col)

    def det(rows, colset):
        if len(colset) == 1:
            return cols[colset[0]][rows[0]]
        acc = np.zeros(1)
        for k, ci in enumerate(colset):
            lead = cols[ci][rows[0]]
            if np.all(lead == 0.0):
                continue
            minor = det(rows[1:], colset[:k] + colset[k + 1 :])
            term = npoly.polymul(lead, minor)
            acc = npoly.polyadd(acc, ((-1.0) ** k) * term)
        return acc

    return det(tuple(range(d)), tuple(range(d)))


def weight_zeros(curve, lo=0.0, hi=1.0):
    """Real roots of the torsion polynomial in [lo, hi] (weight singularities)."""
    coeffs = np.trim_zeros(np.asarray(torsion_poly(curve)), "b")
    if coeffs.size <= 1:
        return ()
    roots = npoly.polyroots(coeffs)
    out = []
    for r in roots:
        if abs(r.imag) < 1e-9 and lo - 1e-12 <= r.real <= hi + 1e-12:
            out.append(float(np.clip(r.real, lo, hi)))
    return tuple(sorted(set(out)))


# ---------------------------------------------------------------------------
# batched evaluation
# ---------------------------------------------------------------------------


def _amplitude(curve, f, rule, alpha):
    amp = f(rule.nodes) * rule.weights
    if alpha is not None:
        amp = amp * affine_weight(curve, alpha, rule.nodes)
    return amp.astype(complex)


def _eval_block(block, gamma_nodes, amp, lam):
    """Fixed-order chunked sum with compensated cross-chunk accumulation."""
    m = block.shape[0]
    s = np.zeros(m, dtype=complex)
    comp = np.zeros(m, dtype=complex)
    for a0 in range(0, gamma_nodes.shape[1], NODE_CHUNK):
        g = gamma_nodes[:, a0 : a0 + NODE_CHUNK]
        phase = lam * (block @ g)
        partial = np.exp(1j * phase) @ amp[a0 : a0 + NODE_CHUNK]
        y = partial - comp
        t = s + y
        comp = (t - s) - y
        s = t
    return s


def extension_eval(curve, lam, targets, f, alpha=None, workers=1,
                   self_check=True, nodes_per_wavelength=NODES_PER_WAVELENGTH):
    """T f at each target; optionally with the affine weight folded in.

    Deterministic for fixed inputs: node order and target blocking are
    fixed, so worker count never changes the result bytes.  A stride of
    targets is re-evaluated at doubled node density; disagreement beyond
    the absolute tolerance raises QuadratureBudgetError.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if targets.shape[1] != curve.d:
        raise ValueError("target dimension mismatch")
    xmax = float(np.max(np.linalg.norm(targets, axis=1))) if targets.size else 0.0
    omega = lam * xmax * curve.velocity_sup(0.0, 1.0)
    grade = weight_zeros(curve, f.lo, f.hi) if alpha is not None else ()
    rule = build_rule(f, omega, nodes_per_wavelength, grade_points=grade)
    if rule.n == 0:
        return np.zeros(targets.shape[0], dtype=complex)
    gamma_nodes = curve.point(rule.nodes).T.copy()  # (d, n)
    amp = _amplitude(curve, f, rule, alpha)

    blocks = [targets[i : i + TARGET_BLOCK]
              for i in range(0, targets.shape[0], TARGET_BLOCK)]
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                lambda b: _eval_block(b, gamma_nodes, amp, lam), blocks))
    else:
        parts = [_eval_block(b, gamma_nodes, amp, lam) for b in blocks]
    values = np.concatenate(parts) if parts else np.zeros(0, dtype=complex)

    if self_check and targets.shape[0] > 0:
        idx = np.arange(0, targets.shape[0], SELF_CHECK_STRIDE)
        fine = build_rule(f, omega, 2 * nodes_per_wavelength, grade_points=grade)
        gfine = curve.point(fine.nodes).T.copy()
        afine = _amplitude(curve, f, fine, alpha)
        ref = _eval_block(targets[idx], gfine, afine, lam)
        err = float(np.max(np.abs(values[idx] - ref)))
        if err > SELF_CHECK_TOL:
            raise QuadratureBudgetError(
                f"self-check error {err:.3e} at lambda={lam}, "
                f"nodes={rule.n}, omega={rule.omega:.3e}"
            )
    return values


def weighted_extension_eval(curve, lam, targets, f, alpha, **kw):
    """Extension evaluation with the affine weight |torsion|^{1/beta} folded in."""
    return extension_eval(curve, lam, targets, f, alpha=alpha, **kw)


def extension_eval_grid(curve, lam, axes, f, alpha=None, self_check=True,
                        nodes_per_wavelength=NODES_PER_WAVELENGTH):
    """T f on the tensor grid spanned by per-coordinate `axes`.

    Agrees with extension_eval at every grid point but factors the phase
    per axis, so the exp cost scales with the axis lengths rather than
    the full grid size.  Returns an array of shape (len(axes[0]), ...).
    """
    if len(axes) != curve.d:
        raise ValueError("need one axis per coordinate")
    axes = [np.asarray(a, dtype=float) for a in axes]
    xmax = math.sqrt(sum(float(np.max(np.abs(a), initial=0.0)) ** 2
                         for a in axes))
    omega = lam * xmax * curve.velocity_sup(0.0, 1.0)
    grade = weight_zeros(curve, f.lo, f.hi) if alpha is not None else ()
    rule = build_rule(f, omega, nodes_per_wavelength, grade_points=grade)
    shape = tuple(a.size for a in axes)
    if rule.n == 0:
        return np.zeros(shape, dtype=complex)

    def assemble(r):
        amp = _amplitude(curve, f, r, alpha)
        gam = curve.point(r.nodes)
        us = [np.exp(1j * lam * np.outer(axes[k], gam[:, k]))
              for k in range(curve.d)]
        if curve.d == 2:
            return us[0] @ (us[1] * amp[None, :]).T
        out = np.empty(shape, dtype=complex)
        if curve.d == 3:
            for k in range(shape[2]):
                a2 = amp * us[2][k]
                out[:, :, k] = us[0] @ (us[1] * a2[None, :]).T
            return out
        # generic fallback, one trailing index at a time
        trail = np.ndindex(*shape[2:])
        for idx in trail:
            a2 = amp.copy()
            for k, i in enumerate(idx):
                a2 = a2 * us[k + 2][i]
            out[(slice(None), slice(None)) + idx] = \
                us[0] @ (us[1] * a2[None, :]).T
        return out

    values = assemble(rule)
    if self_check:
        fine = build_rule(f, omega, 2 * nodes_per_wavelength,
                          grade_points=grade)
        corner = tuple(s - 1 for s in shape)
        mid = tuple(s // 2 for s in shape)
        pts = np.array([[axes[k][i] for k, i in enumerate(idx)]
                        for idx in (corner, mid)])
        gfine = curve.point(fine.nodes).T.copy()
        afine = _amplitude(curve, f, fine, alpha)
        ref = _eval_block(pts, gfine, afine, lam)
        got = np.array([values[corner], values[mid]])
        err = float(np.max(np.abs(got - ref)))
        if err > SELF_CHECK_TOL:
            raise QuadratureBudgetError(
                f"grid self-check error {err:.3e} at lambda={lam}, "
                f"nodes={rule.n}, omega={rule.omega:.3e}"
            )
    return values


def lq_norm(values, mu, q):
    """L^q norm of per-atom values against the measure's weights."""
    values = np.asarray(values)
    if values.shape[0] != mu.n:
        raise ValueError("values not aligned with measure atoms")
    if q == math.inf:
        return float(np.max(np.abs(values)))
    if q < 1:
        raise ValueError("q must be >= 1")
    return float(np.sum(mu.weights * np.abs(values) ** q)) ** (1.0 / q)


# ---------------------------------------------------------------------------
# multilinear L2
# ---------------------------------------------------------------------------


def jacobian_constant(d):
    """Lower-bound constant c_d with |det(gamma'(t_i))| >= c_d prod (t_j - t_i)."""
    return 0.5 / math.prod(math.factorial(i - 1) for i in range(1, d + 1))


def support_separation(fs):
    vals = math.inf
    for i in range(len(fs)):
        for j in range(i + 1, len(fs)):
            gap = max(fs[j].lo - fs[i].hi, fs[i].lo - fs[j].hi)
            vals = min(vals, gap)
    return vals


@dataclass(frozen=True)
class MultilinearResult:
    lhs: float
    bound: float
    separation: float
    box_r: float
    grid_step: float
    tail_fraction: float
    f_l2: tuple

    @property
    def ratio(self):
        return self.lhs / self.bound if self.bound > 0 else math.inf


def _factor_matrices(curve, f, lam, axes, nodes_per_wavelength):
    """Per-axis phase matrices U_k[m, t] and the amplitude for one factor."""
    xmax = math.sqrt(sum(float(np.max(np.abs(a))) ** 2 for a in axes))
    omega = lam * xmax * curve.velocity_sup(0.0, 1.0)
    rule = build_rule(f, omega, nodes_per_wavelength)
    amp = _amplitude(curve, f, rule, None)
    gam = curve.point(rule.nodes)  # (n, d)
    us = [np.exp(1j * lam * np.outer(axes[k], gam[:, k])) for k in range(curve.d)]
    return us, amp


def _product_density_slices(curve, fs, lam, axes, nodes_per_wavelength):
    """Yield |prod_i T f_i|^2 one last-axis slice at a time (memory bounded)."""
    d = curve.d
    factors = [_factor_matrices(curve, f, lam, axes, nodes_per_wavelength)
               for f in fs]
    if d == 2:
        prod = None
        for us, amp in factors:
            fac = us[0] @ (amp[None, :] * us[1]).T
            prod = fac if prod is None else prod * fac
        yield np.abs(prod) ** 2
        return
    if d != 3:
        raise ValueError("multilinear grids implemented for d = 2, 3")
    for k3 in range(len(axes[2])):
        prod = None
        for us, amp in factors:
            fac = us[0] @ ((amp * us[2][k3])[None, :] * us[1]).T
            prod = fac if prod is None else prod * fac
        yield np.abs(prod) ** 2


def multilinear_l2(curve, fs, lam, box_r=20.0, tail_target=0.01,
                   max_doublings=3, nodes_per_wavelength=NODES_PER_WAVELENGTH):
    """L2 norm of the product of the d extensions against its Plancherel bound.

    The product's spectrum lies in a ball of radius lam * sum of curve-arc
    diameters, so a grid at (half) the Nyquist step makes the Riemann sum
    exact up to box truncation; the truncation tail is estimated from the
    decay of concentric shell sums and the box doubled until it is below
    tail_target.
    """
    d = curve.d
    if len(fs) != d:
        raise ValueError("need exactly d factors")
    sep = support_separation(fs)
    active = [f for f in fs if f.width > 0]
    if len(active) == len(fs) and sep <= 0:
        raise SeparationError("supports must be pairwise separated")
    diam_sum = 0.0
    for f in fs:
        if f.width > 0:
            pts = curve.point(np.linspace(f.lo, f.hi, 65))
            diam_sum += float(np.max(np.linalg.norm(pts - pts[0], axis=1)))
    omega_x = max(lam * diam_sum, 1e-9)
    step = math.pi / omega_x

    f_l2 = tuple(f.lp_norm(2) for f in fs)
    c_d = jacobian_constant(d)
    bound = ((2.0 * math.pi) ** (d / 2.0) * lam ** (-d / 2.0)
             / math.sqrt(c_d) * max(sep, 1e-300) ** (-(d * d - d) / 4.0)
             * math.prod(f_l2))
    if any(v == 0.0 for v in f_l2):
        return MultilinearResult(0.0, bound, sep, box_r, step, 0.0, f_l2)

    for _ in range(max_doublings + 1):
        m = int(math.ceil(2.0 * box_r / step))
        axes = [(-box_r + step * (np.arange(m) + 0.5)) for _ in range(d)]
        total = 0.0
        outer = 0.0
        inner2 = 0.0
        # shell masks over the leading two axes (infinity norm)
        r2d = np.maximum(np.abs(axes[0])[:, None], np.abs(axes[1])[None, :])
        slices = _product_density_slices(curve, fs, lam, axes,
                                         nodes_per_wavelength)
        for k, dens in enumerate(slices):
            rad = r2d if d == 2 else np.maximum(r2d, abs(axes[2][k]))
            total += float(np.sum(dens))
            outer += float(np.sum(dens[rad > box_r / 2.0]))
            inner2 += float(np.sum(dens[(rad > box_r / 4.0)
                                        & (rad <= box_r / 2.0)]))
        total *= step ** d
        outer *= step ** d
        inner2 *= step ** d
        q = outer / inner2 if inner2 > 0 else 1.0
        tail = outer * q / (1.0 - q) if q < 0.9 else math.inf
        tail_frac = 1.0 if math.isinf(tail) else tail / max(total + tail, 1e-300)
        if tail_frac <= tail_target:
            return MultilinearResult(
                math.sqrt(total), bound, sep, box_r, step, tail_frac, f_l2)
        box_r *= 2.0
    return MultilinearResult(
        math.sqrt(total), bound, sep, box_r / 2.0, step, tail_frac, f_l2)


# ---------------------------------------------------------------------------
# throughput benchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchReport:
    lam: float
    n_targets: int
    n_nodes: int
    seconds: dict
    checksum: str

    def to_text(self):
        lines = [
            f"lambda = {self.lam}",
            f"targets = {self.n_targets}",
            f"nodes = {self.n_nodes}",
            f"checksum = {self.checksum}",
        ]
        for w, s in sorted(self.seconds.items()):
            lines.append(f"seconds_workers_{w} = {s!r}")
        return "\n".join(lines) + "\n"


def throughput_benchmark(curve, lam, n_targets, worker_counts=(1, 2, 4), seed=0):
    """Timed batch evaluation; checksum must match across worker counts."""
    import hashlib
    import time

    rng = np.random.default_rng(seed)
    targets = rng.uniform(-1.0, 1.0, size=(n_targets, curve.d))
    f = indicator(0.0, 1.0)
    seconds = {}
    checksum = None
    n_nodes = 0
    for w in worker_counts:
        t0 = time.perf_counter()
        vals = extension_eval(curve, lam, targets, f, workers=w, self_check=False)
        seconds[w] = time.perf_counter() - t0
        digest = hashlib.sha256(vals.tobytes()).hexdigest()
        if checksum is None:
            checksum = digest
        elif digest != checksum:
            raise AssertionError("checksum mismatch across worker counts")
        xmax = float(np.max(np.linalg.norm(targets, axis=1)))
        rule = build_rule(f, lam * xmax * curve.velocity_sup())
        n_nodes = rule.n
    return BenchReport(lam, n_targets, n_nodes, seconds, checksum)
