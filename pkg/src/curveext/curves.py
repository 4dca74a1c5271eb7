"""Polynomial space curves: derivatives, torsion, normalization, finite type.

Curves are stored as exact polynomial coefficient data so that every
derivative is evaluated in closed form (no finite differencing).  Smooth
non-polynomial curves enter only through user-supplied truncated Taylor
polynomials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from numpy.polynomial import polynomial as npoly

# order budget for derivative evaluation / finite-type scans
DEFAULT_ORDER_BUDGET = 12

# residual threshold (relative to column norm scale) for the rank scan
RANK_TOL = 1e-9

# number of grid points used for C^k-norm suprema
SUP_GRID = 4097
SUP_SAFETY = 1.01


class CapabilityError(ValueError):
    """Requested derivative order exceeds the declared budget."""


class SingularFrameError(ValueError):
    """Frame matrix is numerically singular."""

    def __init__(self, message, det=None):
        super().__init__(message)
        self.det = det


class NotFiniteTypeError(ValueError):
    """No nonsingular derivative frame found within the order budget."""


def _compose_affine(coeffs, shift, scale):
    """Coefficients of p(scale*t + shift) given coefficients of p (low->high)."""
    out = np.zeros(1)
    for c in reversed(coeffs):
        out = npoly.polymul(out, [shift, scale])
        if out.size == 0:
            out = np.zeros(1)
        out[0] += c
    return out


@dataclass(frozen=True)
class ExponentTuple:
    """Strictly increasing positive-integer exponents (a_1, ..., a_d)."""

    values: tuple

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if len(vals) < 1 or any(v <= 0 for v in vals):
            raise ValueError("exponents must be positive integers")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("exponents must be strictly increasing")
        object.__setattr__(self, "values", vals)

    @property
    def d(self):
        return len(self.values)

    @property
    def total(self):
        return sum(self.values)

    def is_nondegenerate(self):
        return self.values == tuple(range(1, self.d + 1))

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def __len__(self):
        return len(self.values)


def nondegenerate_tuple(d):
    return ExponentTuple(tuple(range(1, d + 1)))


@dataclass(frozen=True)
class CurveSpec:
    """A d-dimensional polynomial curve on [0, 1].

    Each component is a polynomial given by coefficients in increasing
    degree.  ``a`` optionally records the monomial-type exponent tuple the
    curve is associated with (for curves of the form t^{a_i} * phi_i(t)).
    """

    d: int
    coeffs: tuple
    a: ExponentTuple | None = None
    order_budget: int = DEFAULT_ORDER_BUDGET
    label: str = ""

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("dimension must be >= 2")
        if len(self.coeffs) != self.d:
            raise ValueError("need one coefficient list per component")
        tidy = tuple(tuple(float(c) for c in comp) for comp in self.coeffs)
        object.__setattr__(self, "coeffs", tidy)

    @property
    def degree(self):
        return max(len(c) - 1 for c in self.coeffs)

    def component_arrays(self):
        n = max(len(c) for c in self.coeffs)
        mat = np.zeros((self.d, n))
        for i, c in enumerate(self.coeffs):
            mat[i, : len(c)] = c
        return mat

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([npoly.polyval(t, np.asarray(c)) for c in self.coeffs], axis=-1)

    def derivative(self, t, order):
        """order-th derivative vector at t (order 0 is the point itself)."""
        if order > self.order_budget:
            raise CapabilityError(
                f"derivative order {order} exceeds budget {self.order_budget}"
            )
        t = np.asarray(t, dtype=float)
        cols = []
        for c in self.coeffs:
            dc = npoly.polyder(np.asarray(c), order) if order > 0 else np.asarray(c)
            if dc.size == 0:
                dc = np.zeros(1)
            cols.append(npoly.polyval(t, dc))
        return np.stack(cols, axis=-1)

    def velocity_sup(self, lo=0.0, hi=1.0, n=512):
        ts = np.linspace(lo, hi, n)
        return float(np.max(np.linalg.norm(self.derivative(ts, 1), axis=-1)))

    # -- serialization (exact decimal round-trip via repr of float64) ------

    def to_text(self):
        lines = [f"dimension = {self.d}"]
        for i, c in enumerate(self.coeffs):
            lines.append(f"component_{i + 1} = " + " ".join(repr(v) for v in c))
        if self.a is not None:
            lines.append("tuple = " + " ".join(str(v) for v in self.a))
        if self.label:
            lines.append(f"label = {self.label}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        d = None
        comps = {}
        a = None
        label = ""
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed curve line: {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key == "dimension":
                d = int(val)
            elif key.startswith("component_"):
                comps[int(key.split("_")[1])] = tuple(float(v) for v in val.split())
            elif key == "tuple":
                a = ExponentTuple(tuple(int(v) for v in val.split()))
            elif key == "label":
                label = val
            else:
                raise ValueError(f"unknown curve key: {key}")
        if d is None or len(comps) != d:
            raise ValueError("curve file must declare dimension and all components")
        coeffs = tuple(comps[i + 1] for i in range(d))
        return cls(d=d, coeffs=coeffs, a=a, label=label)


def model_curve(d):
    """The model curve (t, t^2/2!, ..., t^d/d!)."""
    coeffs = []
    for k in range(1, d + 1):
        c = [0.0] * (k + 1)
        c[k] = 1.0 / math.factorial(k)
        coeffs.append(tuple(c))
    return CurveSpec(d=d, coeffs=tuple(coeffs), a=nondegenerate_tuple(d), label="model")


def monomial_model(a):
    """The monomial model curve (t^{a_1}/a_1!, ..., t^{a_d}/a_d!)."""
    a = a if isinstance(a, ExponentTuple) else ExponentTuple(tuple(a))
    coeffs = []
    for ai in a:
        c = [0.0] * (ai + 1)
        c[ai] = 1.0 / math.factorial(ai)
        coeffs.append(tuple(c))
    budget = max(DEFAULT_ORDER_BUDGET, a[-1] + 1)
    return CurveSpec(d=a.d, coeffs=tuple(coeffs), a=a, order_budget=budget,
                     label=f"monomial-model-{'-'.join(map(str, a))}")


# ---------------------------------------------------------------------------
# derivative frames, torsion, minors
# ---------------------------------------------------------------------------


def eval_derivatives(curve, t, max_order):
    """Stack gamma(t), gamma'(t), ..., gamma^(max_order)(t) as rows."""
    return np.stack([curve.derivative(t, k) for k in range(max_order + 1)])


def det_exact(mat):
    """Cofactor-expansion determinant for small dense matrices."""
    m = np.asarray(mat, dtype=float)
    n = m.shape[0]
    if n == 1:
        return float(m[0, 0])
    if n == 2:
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    total = 0.0
    for j in range(n):
        if m[0, j] == 0.0:
            continue
        minor = np.delete(np.delete(m, 0, axis=0), j, axis=1)
        total += ((-1.0) ** j) * m[0, j] * det_exact(minor)
    return float(total)


def derivative_matrix(curve, t, orders=None):
    """Matrix whose columns are gamma^{(k)}(t) for the requested orders."""
    if orders is None:
        orders = range(1, curve.d + 1)
    return np.stack([curve.derivative(t, k) for k in orders], axis=-1)


def torsion(curve, t):
    """det(gamma'(t), ..., gamma^(d)(t)); nonvanishing means nondegenerate."""
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return det_exact(derivative_matrix(curve, float(t)))
    return np.array([det_exact(derivative_matrix(curve, float(ti))) for ti in t])


def minor_determinant(curve, rows, t):
    """Determinant of selected rows against leading derivative columns."""
    rows = sorted(rows)
    k = len(rows)
    if any(r < 1 or r > curve.d for r in rows):
        raise ValueError("row indices must lie in 1..d")
    full = derivative_matrix(curve, float(t))
    sub = full[np.array(rows) - 1][:, :k]
    return det_exact(sub)


@dataclass(frozen=True)
class FrameMatrix:
    """Derivative frame M with provenance (curve, base point, tuple)."""

    matrix: np.ndarray
    curve_label: str
    tau: float
    a: ExponentTuple

    @property
    def det(self):
        return det_exact(self.matrix)

    def is_singular(self, tol=RANK_TOL):
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        return abs(self.det) <= tol * scale ** self.a.d


def frame_matrix(curve, tau, a=None):
    a = a or curve.a or nondegenerate_tuple(curve.d)
    mat = derivative_matrix(curve, float(tau), orders=list(a))
    return FrameMatrix(matrix=mat, curve_label=curve.label, tau=float(tau), a=a)


def beta_alpha(alpha, d):
    """Admissibility exponent: (j+1)*alpha + (d-j-1)(d-j)/2 on its bracket."""
    if not (0.0 < alpha <= d):
        raise ValueError(f"alpha must lie in (0, {d}], got {alpha}")
    j = d - int(math.ceil(alpha))
    return (j + 1) * alpha + (d - j - 1) * (d - j) / 2.0


def sigma_exponent(a, alpha):
    """Dyadic block decay scale (sum a_i - d(d+1)/2)/beta(alpha) + 1."""
    a = a if isinstance(a, ExponentTuple) else ExponentTuple(tuple(a))
    d = a.d
    return (a.total - d * (d + 1) / 2.0) / beta_alpha(alpha, d) + 1.0


def diagonal_scaling(h, a):
    """Diagonal matrix diag(h^{a_1}, ..., h^{a_d})."""
    return np.diag([float(h) ** ai for ai in a])


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------


def normalize_curve(curve, tau, h, a=None):
    """Normalized curve [M D_h]^{-1} (gamma(h t + tau) - gamma(tau)).

    The result satisfies the exact phase identity
    x . (gamma(h t + tau) - gamma(tau)) = (D_h M^t x) . result(t).
    """
    if h == 0:
        raise ValueError("h must be nonzero")
    lo, hi = sorted((tau, tau + h))
    if lo < -1e-12 or hi > 1.0 + 1e-12:
        raise ValueError("[tau, tau+h]* must be contained in [0, 1]")
    a = a or curve.a or nondegenerate_tuple(curve.d)
    frame = frame_matrix(curve, tau, a)
    if frame.is_singular():
        raise SingularFrameError(
            f"frame at tau={tau} for tuple {tuple(a)} is singular", det=frame.det
        )
    md = frame.matrix @ diagonal_scaling(h, a)
    shifted = []
    width = 0
    for c in curve.coeffs:
        cc = _compose_affine(np.asarray(c), float(tau), float(h))
        cc[0] = 0.0  # exact subtraction of gamma(tau)
        shifted.append(cc)
        width = max(width, cc.size)
    mat = np.zeros((curve.d, width))
    for i, cc in enumerate(shifted):
        mat[i, : cc.size] = cc
    new = np.linalg.solve(md, mat)
    return CurveSpec(
        d=curve.d,
        coeffs=tuple(tuple(row) for row in new),
        a=a,
        order_budget=curve.order_budget,
        label=f"{curve.label or 'curve'}@tau={tau},h={h}",
    )


@dataclass(frozen=True)
class ClassDistance:
    """Distance of a curve to its model class (approximate sup norm)."""

    curve_label: str
    model: str
    value: float


def _ck_deviation(coeff_diffs, max_order, grid):
    worst = 0.0
    for dc in coeff_diffs:
        c = np.asarray(dc, dtype=float)
        for k in range(max_order + 1):
            ck = npoly.polyder(c, k) if k > 0 else c
            if ck.size == 0:
                continue
            worst = max(worst, float(np.max(np.abs(npoly.polyval(grid, ck)))))
    return worst * SUP_SAFETY


def class_distance(curve, model="plain"):
    """Deviation from the model class, C^{d+1} on gamma or C^{a_d+1} on phi_i.

    ``model`` is either "plain" (distance to the nondegenerate model curve)
    or an ExponentTuple/sequence (distance within the monomial-type class).
    Sup norms are taken over a uniform grid of SUP_GRID points with a
    safety factor; this is a documented approximation of the true sup.
    """
    grid = np.linspace(0.0, 1.0, SUP_GRID)
    if model == "plain":
        ref = model_curve(curve.d)
        width = max(len(a) for a in curve.coeffs + ref.coeffs)
        diffs = []
        for c, r in zip(curve.coeffs, ref.coeffs):
            dc = np.zeros(width)
            dc[: len(c)] += c
            dc[: len(r)] -= r
            diffs.append(dc)
        val = _ck_deviation(diffs, curve.d + 1, grid)
        return ClassDistance(curve.label, "plain", val)

    a = model if isinstance(model, ExponentTuple) else ExponentTuple(tuple(model))
    diffs = []
    for i, c in enumerate(curve.coeffs):
        ai = a[i]
        c = np.asarray(c, dtype=float)
        low = c[: min(ai, c.size)]
        scale = max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
        if low.size and np.max(np.abs(low)) > 1e-9 * scale:
            return ClassDistance(curve.label, f"tuple{tuple(a)}", math.inf)
        phi = c[ai:] if c.size > ai else np.zeros(1)
        phi = phi.copy()
        if phi.size == 0:
            phi = np.zeros(1)
        phi[0] -= 1.0 / math.factorial(ai)
        diffs.append(phi)
    val = _ck_deviation(diffs, a[-1] + 1, grid)
    return ClassDistance(curve.label, f"tuple{tuple(a)}", val)


# ---------------------------------------------------------------------------
# finite type detection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteTypeData:
    a: ExponentTuple
    frame: FrameMatrix
    phi_coeffs: tuple  # polynomial coefficients of each phi_k (low->high)

    def phi(self, k, t):
        return npoly.polyval(np.asarray(t, dtype=float), np.asarray(self.phi_coeffs[k]))


def detect_finite_type(curve, tau):
    """Greedy minimal-tuple scan: smallest orders with independent derivatives.

    Returns the tuple, the frame, and polynomial evaluators for the
    normalized factors phi_k with phi_k(0) = 1/a_k!.
    """
    chosen = []
    basis = []
    scale = 0.0
    for order in range(1, curve.order_budget + 1):
        v = curve.derivative(float(tau), order)
        scale = max(scale, float(np.linalg.norm(v)), 1e-300)
        resid = v.copy()
        for b in basis:
            resid = resid - (resid @ b) * b
        if np.linalg.norm(resid) > RANK_TOL * scale:
            chosen.append(order)
            basis.append(resid / np.linalg.norm(resid))
            if len(chosen) == curve.d:
                break
    if len(chosen) < curve.d:
        raise NotFiniteTypeError(
            f"no nonsingular frame at tau={tau} within order budget "
            f"{curve.order_budget}"
        )
    a = ExponentTuple(tuple(chosen))
    frame = frame_matrix(curve, tau, a)
    # phi_k from the exact polynomial identity
    # M^{-1}(gamma(t+tau)-gamma(tau)) = (t^{a_k} phi_k(t))_k
    shifted = []
    width = 0
    for c in curve.coeffs:
        cc = _compose_affine(np.asarray(c), float(tau), 1.0)
        cc[0] = 0.0
        shifted.append(cc)
        width = max(width, cc.size)
    mat = np.zeros((curve.d, width))
    for i, cc in enumerate(shifted):
        mat[i, : cc.size] = cc
    normalized = np.linalg.solve(frame.matrix, mat)
    phis = []
    for k in range(curve.d):
        row = normalized[k]
        ak = a[k]
        head = row[:ak]
        scale_r = max(1.0, float(np.max(np.abs(row))))
        if head.size and np.max(np.abs(head)) > 1e-7 * scale_r:
            raise NotFiniteTypeError(
                f"component {k + 1} not divisible by t^{ak} at tau={tau}"
            )
        phis.append(tuple(row[ak:]) if row.size > ak else (0.0,))
    return FiniteTypeData(a=a, frame=frame, phi_coeffs=tuple(phis))


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------


def affine_weight(curve, alpha, t):
    """|torsion(t)|^{1/beta(alpha)}; the affine arclength density at alpha=d."""
    b = beta_alpha(alpha, curve.d)
    tor = torsion(curve, t)
    return np.abs(tor) ** (1.0 / b)


def weight_scaling_check(curve, tau, h, a, alpha, t_grid=None):
    """Max relative error of the weight rescaling identity on a t-grid.

    Checks |det M|^{1/beta} |h|^{sigma-1} w_{normalized}(t) = w(h t + tau).
    """
    a = a if isinstance(a, ExponentTuple) else ExponentTuple(tuple(a))
    if t_grid is None:
        t_grid = np.linspace(1e-3, 1.0, 257)
    t_grid = np.asarray(t_grid, dtype=float)
    b = beta_alpha(alpha, curve.d)
    sig = sigma_exponent(a, alpha)
    norm = normalize_curve(curve, tau, h, a)
    det_m = abs(frame_matrix(curve, tau, a).det)
    lhs = det_m ** (1.0 / b) * abs(h) ** (sig - 1.0) * affine_weight(norm, alpha, t_grid)
    rhs = affine_weight(curve, alpha, h * t_grid + tau)
    denom = np.maximum(np.abs(rhs), 1e-300)
    return float(np.max(np.abs(lhs - rhs) / denom))


# ---------------------------------------------------------------------------
# sum map and the nested-integral Jacobian oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JacobianProbe:
    """Ordered sample 0 < t_1 < ... < t_n <= 1 with an optional subtuple."""

    ts: tuple
    b: ExponentTuple | None = None

    def __post_init__(self):
        ts = tuple(float(t) for t in self.ts)
        if any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])) and len(ts) > 1:
            pass  # allow degenerate probes; operations treat them explicitly
        if ts[0] < 0 or ts[-1] > 1:
            raise ValueError("sample points must lie in (0, 1]")
        object.__setattr__(self, "ts", ts)

    @property
    def n(self):
        return len(self.ts)

    def strictly_ordered(self):
        return all(t2 > t1 for t1, t2 in zip(self.ts, self.ts[1:]))


def gamma_sum_map(curve, probe):
    """Sum map Gamma(t) = sum gamma(t_i) and its Jacobian determinant."""
    ts = np.asarray(probe.ts, dtype=float)
    point = curve.point(ts).sum(axis=0)
    jac = np.stack([curve.derivative(float(t), 1) for t in ts], axis=-1)
    if jac.shape[0] != jac.shape[1]:
        raise ValueError("probe length must equal curve dimension for the sum map")
    return point, det_exact(jac)


def jacobian_lower_bound(b, ts):
    """Model lower bound: C * prod |torsion_model(t_i)|^{1/n} * prod (t_j - t_i).

    The implementation constant is 1 / (2 * prod (i-1)!), the same constant
    that enters the separated-support bilinear estimate.
    """
    b = b if isinstance(b, ExponentTuple) else ExponentTuple(tuple(b))
    n = len(ts)
    if n != b.d:
        raise ValueError("tuple length must match probe length")
    c_impl = 0.5 / math.prod(math.factorial(i - 1) for i in range(1, n + 1))
    model = monomial_model(b)
    tor = np.abs(torsion(model, np.asarray(ts, dtype=float)))
    vander = math.prod(
        ts[j] - ts[i] for i in range(n) for j in range(i + 1, n)
    ) if n > 1 else 1.0
    return c_impl * float(np.prod(tor ** (1.0 / n))) * float(vander)


class QuadratureToleranceError(RuntimeError):
    """Adaptive panel bisection failed to converge within the depth budget."""


_GL8 = np.polynomial.legendre.leggauss(8)
_GL16 = np.polynomial.legendre.leggauss(16)


def _gl_panel(f, a, b, rule):
    x, w = rule
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return half * float(np.sum(w * np.asarray([f(mid + half * xi) for xi in x])))


def adaptive_quad(f, a, b, tol=1e-8, max_depth=20):
    """Adaptive panel bisection with a GL8/GL16 error estimate."""
    if a == b:
        return 0.0
    def recurse(lo, hi, depth):
        coarse = _gl_panel(f, lo, hi, _GL8)
        fine = _gl_panel(f, lo, hi, _GL16)
        if abs(fine - coarse) <= tol or depth >= max_depth:
            if abs(fine - coarse) > tol and depth >= max_depth:
                raise QuadratureToleranceError(
                    f"panel [{lo}, {hi}] did not reach tol {tol} at depth {depth}"
                )
            return fine
        mid = 0.5 * (lo + hi)
        return recurse(lo, mid, depth + 1) + recurse(mid, hi, depth + 1)
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    return sign * recurse(a, b, 0)


def _phi_minor_functions(curve, b):
    """Leading-minor evaluators Phi_k(t) of the rescaled derivative matrix.

    Phi_{i,j}(t) = t^{j-b_i} d^j/dt^j (component_i)(t), a polynomial since
    component_i is divisible by t^{b_i}.
    """
    b = b if isinstance(b, ExponentTuple) else ExponentTuple(tuple(b))
    n = b.d
    entries = []
    for i in range(n):
        c = np.asarray(curve.coeffs[i], dtype=float)
        scale = max(1.0, float(np.max(np.abs(c))))
        row = []
        for j in range(1, n + 1):
            dc = npoly.polyder(c, j)
            if dc.size == 0:
                dc = np.zeros(1)
            shift = j - b[i]
            if shift >= 0:
                ec = np.concatenate([np.zeros(shift), dc])
            else:
                head = dc[: -shift] if dc.size >= -shift else dc
                if head.size and np.max(np.abs(head)) > 1e-7 * scale:
                    raise ValueError(
                        f"component {i + 1} is not of monomial type {b[i]}"
                    )
                ec = dc[-shift:] if dc.size > -shift else np.zeros(1)
            row.append(ec)
        entries.append(row)

    def phi_k(k, t):
        if k <= 0:
            return 1.0
        mat = np.empty((k, k))
        for i in range(k):
            for j in range(k):
                mat[i, j] = npoly.polyval(t, entries[i][j])
        return det_exact(mat)

    return phi_k


def ik_recursion(curve, probe, tol=1e-8, max_depth=20):
    """Nested-integral evaluation of the sum-map Jacobian determinant.

    Builds the sequence I_1, ..., I_n from the rescaled leading minors and
    iterated integrals; I_n equals det dGamma/dt on the ordered simplex.
    """
    b = probe.b or curve.a
    if b is None:
        raise ValueError("probe or curve must carry an exponent tuple")
    b = b if isinstance(b, ExponentTuple) else ExponentTuple(tuple(b))
    ts = probe.ts
    n = len(ts)
    if n < 2:
        raise ValueError("recursion needs n >= 2 sample points")
    if not probe.strictly_ordered():
        return 0.0
    bvals = (0,) + tuple(b)  # b_0 = 0
    phi_k = _phi_minor_functions(curve, b)

    def prefactor(k, t):
        # t^{b_{n-k+1} - b_{n-k} - 1} * Phi_{n-k-1} Phi_{n-k+1} / Phi_{n-k}^2
        expo = bvals[n - k + 1] - bvals[n - k] - 1
        num = phi_k(n - k - 1, t) * phi_k(n - k + 1, t)
        den = phi_k(n - k, t) ** 2
        return (t ** expo) * num / den

    def eval_ik(k, args):
        pref = math.prod(prefactor(k, t) for t in args)
        if k == 1:
            return pref
        def integrand(depth_args, level):
            # nested integral over s_i in (args[i], args[i+1])
            if level == k - 1:
                return eval_ik(k - 1, tuple(depth_args))
            return adaptive_quad(
                lambda s: integrand(depth_args + [s], level + 1),
                args[level], args[level + 1], tol=tol, max_depth=max_depth,
            )
        inner = integrand([], 0)
        return pref * inner

    return eval_ik(n, ts)
