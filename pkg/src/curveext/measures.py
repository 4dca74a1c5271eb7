"""Discrete α-regular measures: constructors, audits, rescaling, mollification.

A measure is a finite weighted point cloud carrying a claimed regularity
certificate (alpha, C_mu).  Ball conditions are checked over an explicit
audit protocol with an honest discretization floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .curves import ExponentTuple, beta_alpha, diagonal_scaling

# atom count guard for grid constructors
MAX_ATOMS = 10_000_000

# audit protocol constants
AUDIT_CENTERS = 512
AUDIT_SLACK = 1.1
AUDIT_FLOOR_FACTOR = 4.0

# rectangle-to-cube covering factor entering rescale certificates
def covering_constant(d):
    return 2.0 ** d


def unit_ball_volume(d):
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud with a claimed (alpha, C_mu) certificate."""

    atoms: np.ndarray
    weights: np.ndarray
    alpha: float
    c_mu: float
    resolution: float
    generator: str = ""
    seed: int | None = None
    # per-atom cell scale (coarsest axis); None means isotropic `resolution`
    local_resolution: np.ndarray | None = None

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        if atoms.shape[0] != weights.shape[0]:
            raise ValueError("atom/weight length mismatch")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if not np.all(np.isfinite(atoms)) or not np.all(np.isfinite(weights)):
            raise ValueError("atoms and weights must be finite")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        if self.local_resolution is not None:
            lr = np.asarray(self.local_resolution, dtype=float)
            if lr.shape[0] != atoms.shape[0]:
                raise ValueError("local_resolution length mismatch")
            object.__setattr__(self, "local_resolution", lr)

    @property
    def d(self):
        return self.atoms.shape[1]

    @property
    def n(self):
        return self.atoms.shape[0]

    def total_mass(self):
        return float(np.sum(self.weights))

    def tree(self):
        return cKDTree(self.atoms)

    def ball_mass(self, center, radius, tree=None):
        tree = tree or self.tree()
        idx = tree.query_ball_point(np.asarray(center, dtype=float), radius)
        return float(np.sum(self.weights[idx]))

    def diameter(self):
        lo = self.atoms.min(axis=0)
        hi = self.atoms.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    # -- serialization -----------------------------------------------------

    def to_text(self):
        head = [
            f"dimension = {self.d}",
            f"alpha = {self.alpha!r}",
            f"c_mu = {self.c_mu!r}",
            f"resolution = {self.resolution!r}",
            f"generator = {self.generator}",
            f"seed = {'' if self.seed is None else self.seed}",
            f"local_resolution = {int(self.local_resolution is not None)}",
            "atoms:",
        ]
        lr = self.local_resolution
        rows = []
        for i, (row, w) in enumerate(zip(self.atoms, self.weights)):
            cells = [repr(float(v)) for v in row] + [repr(float(w))]
            if lr is not None:
                cells.append(repr(float(lr[i])))
            rows.append(" ".join(cells))
        return "\n".join(head + rows) + "\n"

    @classmethod
    def from_text(cls, text):
        meta = {}
        rows = []
        in_atoms = False
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if in_atoms:
                rows.append([float(v) for v in line.split()])
            elif line == "atoms:":
                in_atoms = True
            else:
                key, val = (s.strip() for s in line.split("=", 1))
                meta[key] = val
        data = np.asarray(rows, dtype=float)
        d = int(meta["dimension"])
        has_lr = meta.get("local_resolution", "0") == "1"
        return cls(
            atoms=data[:, :d],
            weights=data[:, d],
            alpha=float(meta["alpha"]),
            c_mu=float(meta["c_mu"]),
            resolution=float(meta["resolution"]),
            generator=meta.get("generator", ""),
            seed=int(meta["seed"]) if meta.get("seed") else None,
            local_resolution=data[:, d + 1] if has_lr else None,
        )


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def _axis_cells(lo, hi, n):
    edges = np.linspace(lo, hi, n + 1)
    return edges


def graded_level_structure(d, half, resolution, grading_levels):
    """Tensor levels of an origin-graded dyadic partition of [-half, half]^d.

    Returns a list of (axes, keep_mask, cell_side): level l covers the box
    of half-width half * 2^{-l} with resolution^d cells; all but the last
    level keep only cells outside the next finer box (even resolution makes
    the boxes align with cell edges, so the union is an exact partition).
    """
    if resolution % 2:
        raise ValueError("graded grids require even resolution")
    out = []
    for level in range(grading_levels + 1):
        h_l = half * 2.0 ** (-level)
        edges = _axis_cells(-h_l, h_l, resolution)
        centers = 0.5 * (edges[:-1] + edges[1:])
        cell = 2.0 * h_l / resolution
        axes = tuple(centers.copy() for _ in range(d))
        grids = np.meshgrid(*axes, indexing="ij")
        rad = np.max(np.abs(np.stack(grids, axis=-1)), axis=-1)
        if level < grading_levels:
            keep = rad > h_l / 2.0
        else:
            keep = np.ones_like(rad, dtype=bool)
        out.append((axes, keep, cell))
    return out


def make_lebesgue(d, box=None, resolution=64, grading_levels=0):
    """Uniform (optionally origin-graded) grid measure, alpha = d.

    Weight of each atom is its cell volume, so the cloud is exactly the
    restriction of Lebesgue measure to the box at the grid's resolution.
    With ``grading_levels`` > 0 the box must be centered at the origin and
    cells are refined dyadically toward it (still an exact partition).
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2 per axis")
    if box is None:
        box = (-1.0, 1.0)
    lo, hi = float(box[0]), float(box[1])
    if grading_levels == 0:
        if resolution ** d > MAX_ATOMS:
            raise ValueError("atom count overflow")
        edges = _axis_cells(lo, hi, resolution)
        centers = 0.5 * (edges[:-1] + edges[1:])
        cell = (hi - lo) / resolution
        grids = np.meshgrid(*([centers] * d), indexing="ij")
        atoms = np.stack([g.ravel() for g in grids], axis=-1)
        weights = np.full(atoms.shape[0], cell ** d)
        res = cell
    else:
        if abs(lo + hi) > 1e-12:
            raise ValueError("graded grids require an origin-centered box")
        pieces = []
        wts = []
        for axes, keep, cell in graded_level_structure(
                d, hi, resolution, grading_levels):
            grids = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([g.ravel() for g in grids], axis=-1)[keep.ravel()]
            pieces.append(pts)
            wts.append(np.full(pts.shape[0], cell ** d))
            res = cell
        atoms = np.concatenate(pieces)
        weights = np.concatenate(wts)
        if atoms.shape[0] > MAX_ATOMS:
            raise ValueError("atom count overflow")
    return DiscreteMeasure(
        atoms=atoms,
        weights=weights,
        alpha=float(d),
        c_mu=unit_ball_volume(d) * 1.1,
        resolution=res,
        generator=f"lebesgue(d={d}, box=({lo},{hi}), resolution={resolution}, "
                  f"grading={grading_levels})",
    )


def _signed_power_integral(a, b, p):
    """Exact integral of |u|^p over [a, b] for p > -1."""
    def prim(u):
        return math.copysign(abs(u) ** (p + 1.0), u) / (p + 1.0)
    return prim(b) - prim(a)


def _graded_symmetric_edges(extent, resolution, grading_levels):
    """Partition of [-extent, extent] refined geometrically toward 0."""
    if resolution % 2:
        resolution += 1
    edges = list(np.linspace(-extent, extent, resolution + 1))
    for _ in range(grading_levels):
        # split the two cells adjacent to 0
        zi = edges.index(0.0)
        left, right = edges[zi - 1], edges[zi + 1]
        edges.insert(zi, left / 2.0)
        edges.insert(edges.index(0.0) + 1, right / 2.0)
    return np.asarray(edges)


def make_appendix_a(d, alpha, j, extent=1.0, resolution=32, grading_levels=0):
    """Singular slice measure: point mass in x_1..x_j times |x_{j+1}|^p density.

    p = alpha - d + j on the bracket d-j-1 < alpha <= d-j.  The density is
    integrated exactly per cell; the first live axis may be graded toward
    its singularity at 0.
    """
    if not (0 <= j < d):
        raise ValueError("j must satisfy 0 <= j < d")
    if not (d - j - 1 < alpha <= d - j):
        raise ValueError(f"alpha={alpha} outside bracket ({d - j - 1}, {d - j}]")
    p = alpha - d + j
    live = d - j
    sing_edges = _graded_symmetric_edges(extent, resolution, grading_levels)
    sing_centers = 0.5 * (sing_edges[:-1] + sing_edges[1:])
    sing_weights = np.array([
        _signed_power_integral(a, b, p)
        for a, b in zip(sing_edges[:-1], sing_edges[1:])
    ])
    flat_edges = _axis_cells(-extent, extent, resolution)
    flat_centers = 0.5 * (flat_edges[:-1] + flat_edges[1:])
    flat_cell = 2.0 * extent / resolution

    axes_centers = [sing_centers] + [flat_centers] * (live - 1)
    axes_weights = [sing_weights] + [np.full(flat_centers.size, flat_cell)] * (live - 1)
    grids = np.meshgrid(*axes_centers, indexing="ij")
    wgrids = np.meshgrid(*axes_weights, indexing="ij")
    pts_live = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=1)
    sing_cells = np.diff(sing_edges)
    cell_grid = np.meshgrid(
        *([sing_cells] + [np.full(flat_centers.size, flat_cell)] * (live - 1)),
        indexing="ij",
    )
    local = np.max(np.stack([g.ravel() for g in cell_grid], axis=-1), axis=1)
    if pts_live.shape[0] > MAX_ATOMS:
        raise ValueError("atom count overflow")
    atoms = np.zeros((pts_live.shape[0], d))
    atoms[:, j:] = pts_live

    # worst ball mass: square of side 2 rho around the singular axis
    if p <= 0:
        c_mu = 2.0 ** live / (p + 1.0)
    else:
        c_mu = 2.0 ** live * extent ** p
    res = float(np.min(np.diff(sing_edges)))
    return DiscreteMeasure(
        atoms=atoms,
        weights=weights,
        alpha=float(alpha),
        c_mu=c_mu,
        resolution=min(res, flat_cell),
        generator=f"appendix_a(d={d}, alpha={alpha}, j={j}, extent={extent}, "
                  f"resolution={resolution}, grading={grading_levels})",
        local_resolution=local,
    )


def make_cantor(d, ratio, depth, embedding=None):
    """Self-similar product measure with alpha = d*log2/log(1/ratio)."""
    if not (0.0 < ratio < 0.5):
        raise ValueError("ratio must lie in (0, 1/2)")
    if depth > 20:
        raise ValueError("depth must be <= 20")
    if depth == 0:
        atoms = np.full((1, d), 0.5)
        alpha = d * math.log(2.0) / math.log(1.0 / ratio)
        # degenerate single-atom case: certificate only above the floor
        floor = AUDIT_FLOOR_FACTOR * 1.0
        return DiscreteMeasure(
            atoms=atoms, weights=np.ones(1), alpha=alpha,
            c_mu=floor ** (-alpha), resolution=1.0,
            generator=f"cantor(d={d}, ratio={ratio}, depth=0) [degenerate]",
        )
    if (2 ** depth) ** d > MAX_ATOMS:
        raise ValueError("atom count overflow")
    starts = np.array([0.0])
    length = 1.0
    for _ in range(depth):
        starts = np.concatenate([starts, starts + length * (1.0 - ratio)])
        length *= ratio
    centers1 = np.sort(starts + length / 2.0)
    alpha1 = math.log(2.0) / math.log(1.0 / ratio)
    grids = np.meshgrid(*([centers1] * d), indexing="ij")
    atoms = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.full(atoms.shape[0], 2.0 ** (-depth * d))
    if embedding is not None:
        atoms = atoms @ np.asarray(embedding, dtype=float).T
    alpha = d * alpha1
    c_mu = (2.0 * ratio ** (-alpha1)) ** d
    return DiscreteMeasure(
        atoms=atoms, weights=weights, alpha=alpha, c_mu=c_mu,
        resolution=length,
        generator=f"cantor(d={d}, ratio={ratio}, depth={depth})",
    )


# ---------------------------------------------------------------------------
# regularity audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditReport:
    c_est: float
    exponent_fit: float
    passed: bool
    worst_center: np.ndarray
    worst_radius: float
    floor: float


def regularity_audit(mu, n_centers=AUDIT_CENTERS, seed=0, slack=AUDIT_SLACK):
    """Estimate sup mu(B(x, rho))/rho^alpha over atoms and dyadic radii.

    The discretization floor is per center: radii below 4x the local atom
    spacing (nearest-neighbor distance) are ignored there, so graded clouds
    are audited honestly at every scale they actually resolve.  Passes iff
    the estimate is <= C_mu * slack.
    """
    rng = np.random.default_rng(seed)
    if mu.n <= n_centers:
        centers = mu.atoms
    else:
        idx = rng.choice(mu.n, size=n_centers, replace=False)
        centers = mu.atoms[idx]
    tree = mu.tree()
    if mu.local_resolution is not None:
        if mu.n <= n_centers:
            nn = mu.local_resolution
        else:
            nn = mu.local_resolution[idx]
    elif mu.n > 1:
        nn = np.maximum(tree.query(centers, k=2)[0][:, 1], 1e-300)
    else:
        nn = np.full(centers.shape[0], mu.resolution)
    floors = AUDIT_FLOOR_FACTOR * nn
    floor = float(np.min(floors))
    diam = max(mu.diameter(), floor * 2.0)
    radii = []
    r = diam
    while r >= floor:
        radii.append(r)
        r /= 2.0
    worst = -1.0
    worst_center = centers[0]
    worst_radius = radii[0]
    fit_r, fit_m = [], []
    for rho in radii:
        valid = floors <= rho
        if not np.any(valid):
            continue
        counts = tree.query_ball_point(centers[valid], rho)
        w = mu.weights
        masses = np.array([np.sum(w[c]) for c in counts])
        ratios = masses / rho ** mu.alpha
        k = int(np.argmax(ratios))
        if rho <= diam / 4.0:
            # saturation near the diameter would bias the exponent fit
            fit_r.append(rho)
            fit_m.append(max(float(np.max(masses)), 1e-300))
        if ratios[k] > worst:
            worst = float(ratios[k])
            worst_center = centers[valid][k]
            worst_radius = rho
    if len(fit_r) > 1:
        fit = float(np.polyfit(np.log2(fit_r), np.log2(fit_m), 1)[0])
    else:
        fit = float("nan")
    return AuditReport(
        c_est=worst,
        exponent_fit=fit,
        passed=worst <= mu.c_mu * slack,
        worst_center=np.asarray(worst_center),
        worst_radius=float(worst_radius),
        floor=floor,
    )


# ---------------------------------------------------------------------------
# pushforward and rescaling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PushforwardSpec:
    """Anisotropic rescale y = D_h A x with the certified constant update."""

    a: ExponentTuple
    h: float
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if not (0.0 < abs(self.h) <= 1.0):
            raise ValueError("h must satisfy 0 < |h| <= 1")
        a = self.a if isinstance(self.a, ExponentTuple) else ExponentTuple(tuple(self.a))
        object.__setattr__(self, "a", a)
        m = self.matrix
        if m is None:
            m = np.eye(a.d)
        m = np.asarray(m, dtype=float)
        if abs(np.linalg.det(m)) < 1e-300:
            raise ValueError("matrix A must be nonsingular")
        object.__setattr__(self, "matrix", m)

    def linear_map(self):
        return diagonal_scaling(self.h, self.a) @ self.matrix


def rescaled_constant(c_mu, spec, alpha):
    """Certificate constant after pushforward, from the cube-covering count."""
    a = spec.a
    d = a.d
    inv_norm = float(np.linalg.norm(np.linalg.inv(spec.matrix), 2))
    expo = d * (d + 1) / 2.0 - beta_alpha(alpha, d) - a.total
    return c_mu * inv_norm ** alpha * abs(spec.h) ** expo * covering_constant(d)


def pushforward(mu, spec):
    """Image measure under y = D_h A x; weights (hence all integrals) unchanged.

    The defining identity is integral of F against the image equals the
    integral of F(D_h A x) against the original, which is exactly atom
    relabeling for a point cloud.
    """
    if spec.a.d != mu.d:
        raise ValueError("tuple dimension does not match measure dimension")
    lin = spec.linear_map()
    atoms = mu.atoms @ lin.T
    # conservative cell-scale update: the coarsest axis shrinks by at most
    # the operator norm, the scalar floor by the smallest singular value
    svals = np.linalg.svd(lin, compute_uv=False)
    smin, smax = float(np.min(svals)), float(np.max(svals))
    lr = None if mu.local_resolution is None else mu.local_resolution * smax
    return DiscreteMeasure(
        atoms=atoms,
        weights=mu.weights,
        alpha=mu.alpha,
        c_mu=rescaled_constant(mu.c_mu, spec, mu.alpha),
        resolution=mu.resolution * smin,
        generator=f"pushforward[h={spec.h}, a={tuple(spec.a)}]({mu.generator})",
        seed=mu.seed,
        local_resolution=lr,
    )


def rescale_bound_check(mu, spec, trials=200, seed=0):
    """Worst observed ratio of image ball mass to the certified bound."""
    push = pushforward(mu, spec)
    rng = np.random.default_rng(seed)
    tree = push.tree()
    floor = AUDIT_FLOOR_FACTOR * push.resolution
    diam = max(push.diameter(), floor * 2.0)
    worst = 0.0
    idx = rng.integers(0, push.n, size=trials)
    logs = rng.uniform(math.log2(floor), math.log2(diam), size=trials)
    for i, lg in zip(idx, logs):
        rho = 2.0 ** lg
        mass = push.ball_mass(push.atoms[i], rho, tree=tree)
        worst = max(worst, mass / (push.c_mu * rho ** push.alpha))
    return worst


# ---------------------------------------------------------------------------
# mollified sup
# ---------------------------------------------------------------------------


def kernel_profile(r2, d):
    """Radial profile (1 + |x|^2)^{-(d+2)} as a function of |x|^2."""
    return (1.0 + r2) ** (-(d + 2.0))


def mollified_sup(mu, lam, candidates=None, chunk=4096):
    """Sup over candidate centers of the lambda-mollified measure.

    Evaluates sum_y lambda^d phi(lambda (x - y)) dmu(y) with the heavy-tail
    polynomial profile; candidates default to a deterministic atom
    subsample (plus the origin).
    """
    if lam < 1.0:
        raise ValueError("lambda must be >= 1")
    if candidates is None:
        stride = max(1, mu.n // 512)
        candidates = np.vstack([mu.atoms[::stride], np.zeros((1, mu.d))])
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    best = 0.0
    for start in range(0, candidates.shape[0], 64):
        cs = candidates[start : start + 64]
        acc = np.zeros(cs.shape[0])
        for a0 in range(0, mu.n, chunk):
            block = mu.atoms[a0 : a0 + chunk]
            w = mu.weights[a0 : a0 + chunk]
            diff = cs[:, None, :] - block[None, :, :]
            r2 = (lam * lam) * np.sum(diff * diff, axis=-1)
            acc += (kernel_profile(r2, mu.d) * w[None, :]).sum(axis=1)
        best = max(best, float(np.max(acc)) * lam ** mu.d)
    return best


def mollified_slope(mu, lams, candidates=None):
    """Least-squares slope of log2 mollified_sup against log2 lambda."""
    vals = [mollified_sup(mu, lam, candidates=candidates) for lam in lams]
    x = np.log2(np.asarray(lams, dtype=float))
    y = np.log2(np.asarray(vals))
    return float(np.polyfit(x, y, 1)[0]), vals
