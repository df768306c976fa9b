"""Flat phase spaces and the smooth maps acting on them.

Points are plain numpy arrays.  A phase space is either the flat unit
torus T^n (coordinates canonicalized to [0, 1)) or Euclidean R^n.  On
both, the exponential chart at a point is a translation, so tangent
vectors and displacement vectors coincide and chart derivatives equal
the ambient Jacobian.

Shipped systems: the cat map, a sinusoidally perturbed cat map, affine
maps on R^n, and post-composition with a constant shift (the standard
"perturbed dynamics" used throughout the tests).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChartDomainError",
    "Phase",
    "SmoothMap",
    "TorusLinearMap",
    "cat_map",
    "PerturbedCatMap",
    "AffineMap",
    "ShiftedMap",
    "SystemBounds",
    "estimate_bounds",
    "sup_distance",
]


class ChartDomainError(ValueError):
    """A point lies outside the injective range of an exponential chart."""


@dataclass(frozen=True)
class Phase:
    """A flat phase space: the unit torus T^n or Euclidean R^n."""

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("torus", "euclidean"):
            raise ValueError(f"unknown phase kind {self.kind!r}")
        if self.dim < 2:
            raise ValueError("phase spaces must be at least 2-dimensional")

    @property
    def injectivity_radius(self) -> float:
        return 0.5 if self.kind == "torus" else np.inf

    def canon(self, x):
        """Canonical representative; torus coordinates in [0, 1)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "euclidean":
            return x
        c = np.mod(x, 1.0)
        # rounding can land exactly on 1.0 for tiny negative inputs
        return np.where(c >= 1.0, 0.0, c)

    def wrap(self, d):
        """Shortest displacement representative, coordinates in (-1/2, 1/2]."""
        d = np.asarray(d, dtype=float)
        if self.kind == "euclidean":
            return d
        w = d - np.floor(d + 0.5)
        return np.where(w <= -0.5, w + 1.0, w)

    def exp(self, x, v):
        """Chart map: the point reached from x by the tangent vector v."""
        return self.canon(np.asarray(x, dtype=float) + np.asarray(v, dtype=float))

    def log(self, x, q):
        """Inverse chart: tangent vector at x pointing to q.

        On the torus the displacement must stay below the injectivity
        radius (1/2) for the shortest representative to be unique.
        """
        v = self.wrap(np.asarray(q, dtype=float) - np.asarray(x, dtype=float))
        if self.kind == "torus":
            if np.any(np.linalg.norm(np.atleast_2d(v), axis=-1) >= self.injectivity_radius):
                raise ChartDomainError(
                    "points are separated by at least the injectivity radius (1/2)"
                )
        return v

    def distance(self, x, q):
        d = np.asarray(q, dtype=float) - np.asarray(x, dtype=float)
        return np.linalg.norm(self.wrap(d), axis=-1)

    def grid(self, res: int):
        """Uniform sampling grid with ``res`` points per axis (torus only).

        Grids of different resolutions are nested whenever the resolutions
        divide each other, so grid suprema are monotone under refinement.
        """
        if self.kind != "torus":
            raise ValueError("sampling grids are only defined on the torus")
        if res ** self.dim > 2 ** 22:
            raise ValueError("grid too large; lower the per-axis resolution")
        axes = [np.arange(res) / res] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def random_point(self, rng):
        if self.kind == "torus":
            return rng.random(self.dim)
        return rng.uniform(-1.0, 1.0, self.dim)


class SmoothMap:
    """Base class for a C^1 map with an explicit derivative.

    Subclasses provide ``__call__`` and ``jacobian``; both accept a single
    point ``(dim,)`` or a batch ``(m, dim)``.  ``at_step`` is the hook for
    step-indexed (nonautonomous) systems and defaults to the map itself.
    """

    phase: Phase

    def __call__(self, x):
        raise NotImplementedError

    def jacobian(self, x):
        raise NotImplementedError

    def at_step(self, j: int) -> "SmoothMap":
        return self

    @property
    def has_exact_inverse(self) -> bool:
        return False

    def inverse(self, y):
        raise NotImplementedError(f"{type(self).__name__} has no inverse")

    def iterate(self, x, n: int):
        x = np.asarray(x, dtype=float)
        for _ in range(n):
            x = self(x)
        return x

    def orbit(self, x, n: int):
        """Points x, f(x), ..., f^n(x) as an ``(n + 1, dim)`` array."""
        out = np.empty((n + 1, self.phase.dim))
        out[0] = self.phase.canon(x)
        for t in range(n):
            out[t + 1] = self(out[t])
        return out

    def operator_norm_bounds(self):
        """Exact ``max(sup ||Df||, sup ||Df^-1||)`` when available, else None."""
        return None


class TorusLinearMap(SmoothMap):
    """Automorphism of the torus induced by a unimodular integer matrix."""

    def __init__(self, matrix):
        m = np.asarray(matrix)
        if not np.all(m == np.round(m)):
            raise ValueError("torus automorphisms need an integer matrix")
        self.int_matrix = [[int(v) for v in row] for row in np.round(m).astype(int)]
        det = int(round(np.linalg.det(m)))
        if abs(det) != 1:
            raise ValueError("matrix must be unimodular (determinant +-1)")
        self.matrix = np.asarray(m, dtype=float)
        n = self.matrix.shape[0]
        # adjugate over the determinant: exact integer inverse
        self._inv_matrix = np.round(np.linalg.inv(self.matrix) * det).astype(float) / det
        self.phase = Phase("torus", n)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.phase.canon(x @ self.matrix.T)

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.matrix, x.shape[:-1] + self.matrix.shape).copy()

    @property
    def has_exact_inverse(self) -> bool:
        return True

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        return self.phase.canon(y @ self._inv_matrix.T)

    def operator_norm_bounds(self):
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return float(max(s[0], 1.0 / s[-1]))


def cat_map() -> TorusLinearMap:
    """The Arnold cat map [[2, 1], [1, 1]] on T^2."""
    return TorusLinearMap([[2, 1], [1, 1]])


class PerturbedCatMap(SmoothMap):
    """Cat map plus an amplitude-c sinusoidal shear.

    f(x) = A x + (c / 2pi) (sin 2pi x2, sin 2pi x1)  (mod 1),
    with A the cat-map matrix.  The perturbation is 1-periodic in each
    coordinate, so the map is well defined on the torus.
    """

    def __init__(self, amplitude: float):
        self.amplitude = float(amplitude)
        self.matrix = np.array([[2.0, 1.0], [1.0, 1.0]])
        self.phase = Phase("torus", 2)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        c = self.amplitude / (2.0 * np.pi)
        y1 = 2.0 * x1 + x2 + c * np.sin(2.0 * np.pi * x2)
        y2 = x1 + x2 + c * np.sin(2.0 * np.pi * x1)
        return self.phase.canon(np.stack([y1, y2], axis=-1))

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        c = self.amplitude
        j = np.empty(x.shape[:-1] + (2, 2))
        j[..., 0, 0] = 2.0
        j[..., 0, 1] = 1.0 + c * np.cos(2.0 * np.pi * x2)
        j[..., 1, 0] = 1.0 + c * np.cos(2.0 * np.pi * x1)
        j[..., 1, 1] = 1.0
        return j

    def inverse(self, y, tol: float = 1e-14, max_iter: int = 60):
        # damped-free Newton; the linear part dominates for small amplitudes
        y = np.asarray(y, dtype=float)
        z = TorusLinearMap(self.matrix).inverse(y)
        for _ in range(max_iter):
            r = self.phase.wrap(self(z) - y)
            if np.linalg.norm(r) <= tol:
                return self.phase.canon(z)
            z = self.phase.canon(z - np.linalg.solve(self.jacobian(z), r))
        raise ChartDomainError("inverse iteration did not converge")


class AffineMap(SmoothMap):
    """x -> M x + b on Euclidean space."""

    def __init__(self, matrix, offset=None):
        self.matrix = np.asarray(matrix, dtype=float)
        n = self.matrix.shape[0]
        self.offset = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
        self.phase = Phase("euclidean", n)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.matrix.T + self.offset

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.matrix, x.shape[:-1] + self.matrix.shape).copy()

    @property
    def has_exact_inverse(self) -> bool:
        return True

    def inverse(self, y):
        return np.linalg.solve(self.matrix, np.asarray(y, dtype=float) - self.offset)

    def operator_norm_bounds(self):
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return float(max(s[0], 1.0 / s[-1]))


class ShiftedMap(SmoothMap):
    """g = shift after f; the derivative is unchanged."""

    def __init__(self, base: SmoothMap, shift):
        self.base = base
        self.shift = np.asarray(shift, dtype=float)
        self.phase = base.phase

    def __call__(self, x):
        return self.phase.canon(self.base(x) + self.shift)

    def jacobian(self, x):
        return self.base.jacobian(x)

    @property
    def has_exact_inverse(self) -> bool:
        return self.base.has_exact_inverse

    def inverse(self, y):
        y = np.asarray(y, dtype=float) - self.shift
        return self.base.inverse(self.phase.canon(y) if self.phase.kind == "torus" else y)

    def operator_norm_bounds(self):
        return self.base.operator_norm_bounds()


@dataclass(frozen=True)
class SystemBounds:
    """Sampled derivative bounds for a map.

    R bounds both ||Df|| and ||Df^-1|| over the sampling grid;
    lip_modulus is the sampled modulus of continuity of Df at the given
    displacement scale.  Both are reproducible given grid_res and scale.
    """

    R: float
    lip_modulus: float
    grid_res: int
    scale: float


def _batch_spectral_extremes(jac):
    s = np.linalg.svd(jac, compute_uv=False)
    return float(s[..., 0].max()), float(s[..., -1].min())


def estimate_bounds(
    f: SmoothMap,
    grid_res: int = 256,
    scale: float = 0.1,
    modulus_res: int = 64,
    n_offsets: int = 8,
    rng_seed: int = 0,
) -> SystemBounds:
    """Estimate R = max(sup ||Df||, sup ||Df^-1||) and the Df modulus of continuity.

    Constant-derivative maps report their exact operator norms and a zero
    modulus.  Otherwise a uniform torus grid is sampled (grid suprema are
    lower estimates of the true suprema).
    """
    exact = f.operator_norm_bounds()
    if exact is not None:
        return SystemBounds(R=max(exact, 1.0), lip_modulus=0.0, grid_res=0, scale=scale)
    pts = f.phase.grid(grid_res)
    hi, lo = _batch_spectral_extremes(f.jacobian(pts))
    if lo <= 1e-14:
        raise ValueError("derivative is numerically singular on the sampling grid")
    R = max(hi, 1.0 / lo, 1.0)

    coarse = f.phase.grid(modulus_res)
    base = f.jacobian(coarse)
    rng = np.random.default_rng(rng_seed)
    worst = 0.0
    for _ in range(n_offsets):
        u = rng.standard_normal(f.phase.dim)
        u *= scale / np.linalg.norm(u)
        moved = f.jacobian(f.phase.canon(coarse + u))
        diff = np.linalg.svd(moved - base, compute_uv=False)[..., 0]
        worst = max(worst, float(diff.max()))
    return SystemBounds(R=R, lip_modulus=worst, grid_res=grid_res, scale=scale)


def _affine_parts(f: SmoothMap):
    if isinstance(f, AffineMap):
        return f.matrix, f.offset
    if isinstance(f, ShiftedMap):
        parts = _affine_parts(f.base)
        if parts is not None:
            return parts[0], parts[1] + f.shift
    return None


def sup_distance(f: SmoothMap, g: SmoothMap, grid_res: int = 256) -> float:
    """Grid supremum of the pointwise distance between f and g.

    A lower estimate of the true sup on the torus; exact for affine pairs
    with equal linear parts on Euclidean space.
    """
    if f.phase != g.phase:
        raise ValueError("maps live on different phase spaces")
    if f.phase.kind == "torus":
        if grid_res < 64:
            raise ValueError("use at least 64 grid points per axis")
        pts = f.phase.grid(grid_res)
        return float(f.phase.distance(f(pts), g(pts)).max())
    fa, ga = _affine_parts(f), _affine_parts(g)
    if fa is None or ga is None or not np.array_equal(fa[0], ga[0]):
        raise ValueError("sup distance on R^n needs affine maps with equal linear parts")
    return float(np.linalg.norm(fa[1] - ga[1]))
