"""Grid-sampled scalar and displacement fields on a symmetric box.

Fields live on a uniform tensor grid over ``[-L, L]^dim``. Derivatives are
fourth-order finite differences (central stencils inside, one-sided stencils
on the two rows nearest each face). Off-grid evaluation is separable
piecewise-cubic Lagrange interpolation, which reproduces cubics exactly and
therefore matches the fourth-order accuracy of the stencils. Points outside
the box either read as zero (fields that decay) or as the clamped boundary
value (fields that merely stay bounded).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .descriptors import (
    VARIABLES,
    Expr,
    evaluate_on,
    parse_scalar,
    parse_vector,
)
from .errors import DescriptorError, FieldError, UnsupportedOrderError

MAX_DERIVATIVE_ORDER = 6
EXTRAPOLATION_MODES = ("zero", "clamp")


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on ``[-half_width, half_width]^dim``."""

    dim: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise FieldError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not self.half_width > 0.0:
            raise FieldError(f"half_width must be positive, got {self.half_width}")
        n = self.points_per_axis
        if n < 17 or n % 2 == 0:
            raise FieldError(f"points_per_axis must be odd and at least 17, got {n}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points_per_axis - 1)

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    @property
    def node_count(self) -> int:
        return self.points_per_axis ** self.dim

    def axis_coordinates(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.points_per_axis)

    def nodes(self) -> np.ndarray:
        """All grid nodes as a read-only ``(node_count, dim)`` array, row-major."""
        return _grid_nodes(self)

    def doubled(self) -> "Grid":
        """Same box with halved spacing (new nodes at old nodes and midpoints)."""
        return Grid(self.dim, self.half_width, 2 * self.points_per_axis - 1)


@lru_cache(maxsize=32)
def _grid_nodes(grid: Grid) -> np.ndarray:
    axes = [grid.axis_coordinates() for _ in range(grid.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    nodes.flags.writeable = False
    return nodes


def multi_indices(dim: int, order: int) -> list:
    """All derivative multi-indices of total order exactly ``order``."""
    if order == 0:
        return [(0,) * dim]
    out = []
    for splits in itertools.combinations_with_replacement(range(dim), order):
        alpha = [0] * dim
        for axis in splits:
            alpha[axis] += 1
        out.append(tuple(alpha))
    return out


def multi_indices_up_to(dim: int, order: int) -> list:
    out = []
    for k in range(order + 1):
        out.extend(multi_indices(dim, k))
    return out


def _d1(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Fourth-order first derivative along ``axis`` (one-sided at the faces)."""
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[2:-2] = (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * h)
    out[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h)
    out[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / (12.0 * h)
    out[-1] = (25.0 * v[-1] - 48.0 * v[-2] + 36.0 * v[-3] - 16.0 * v[-4] + 3.0 * v[-5]) / (12.0 * h)
    out[-2] = (3.0 * v[-1] + 10.0 * v[-2] - 18.0 * v[-3] + 6.0 * v[-4] - v[-5]) / (12.0 * h)
    return np.moveaxis(out, 0, axis)


def _check_alpha(alpha, dim: int) -> tuple:
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != dim or any(a < 0 for a in alpha):
        raise FieldError(f"multi-index {alpha} does not match dimension {dim}")
    if sum(alpha) > MAX_DERIVATIVE_ORDER:
        raise UnsupportedOrderError(
            f"derivative order {sum(alpha)} exceeds the supported cap {MAX_DERIVATIVE_ORDER}"
        )
    return alpha


def _derive_values(values: np.ndarray, alpha: tuple, h: float) -> np.ndarray:
    out = values
    for axis, count in enumerate(alpha):
        for _ in range(count):
            out = _d1(out, axis, h)
    return out


def _interp_stencil(grid: Grid, coords: np.ndarray):
    """Per-axis stencil bases and cubic Lagrange weights for query coordinates.

    ``coords`` has shape ``(m, dim)`` and must already lie inside the box.
    Returns ``(bases, weights)`` with shapes ``(m, dim)`` and ``(m, dim, 4)``.
    The four weights interpolate through nodes ``base .. base+3``; near a face
    the stencil shifts inward, which keeps the interpolant cubic-exact.
    """
    n = grid.points_per_axis
    u = (coords + grid.half_width) / grid.spacing
    base = np.clip(np.floor(u).astype(np.int64) - 1, 0, n - 4)
    t = u - (base + 1)
    w = np.empty(t.shape + (4,))
    w[..., 0] = -t * (t - 1.0) * (t - 2.0) / 6.0
    w[..., 1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
    w[..., 2] = -(t + 1.0) * t * (t - 2.0) / 2.0
    w[..., 3] = (t + 1.0) * t * (t - 1.0) / 6.0
    return base, w


def _sample_values(values: np.ndarray, grid: Grid, points: np.ndarray, extrapolation: str) -> np.ndarray:
    """Interpolate grid ``values`` at ``points`` of shape ``(m, dim)``."""
    half = grid.half_width
    if extrapolation == "clamp":
        coords = np.clip(points, -half, half)
        inside = None
    else:
        inside = np.all(np.abs(points) <= half, axis=-1)
        coords = np.clip(points, -half, half)
    base, weights = _interp_stencil(grid, coords)
    flat = values.reshape(-1)
    strides = [grid.points_per_axis ** (grid.dim - 1 - j) for j in range(grid.dim)]
    acc = np.zeros(points.shape[0])
    for offsets in itertools.product(range(4), repeat=grid.dim):
        idx = np.zeros(points.shape[0], dtype=np.int64)
        w = np.ones(points.shape[0])
        for j, k in enumerate(offsets):
            idx += (base[:, j] + k) * strides[j]
            w = w * weights[:, j, k]
        acc += w * flat[idx]
    if inside is not None:
        acc = np.where(inside, acc, 0.0)
    return acc


def _normalize_points(points, dim: int):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 0 or pts.shape[-1] != dim:
        raise FieldError(f"points must have trailing dimension {dim}, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        bad = np.argwhere(~np.isfinite(pts.reshape(-1, dim)))[0]
        raise FieldError(f"point {bad[0]} has a non-finite coordinate (axis {bad[1]})")
    lead = pts.shape[:-1]
    return pts.reshape(-1, dim), lead


def _descriptor_env(grid: Grid, time: float | None):
    nodes = grid.nodes()
    env = {VARIABLES[j]: nodes[:, j] for j in range(grid.dim)}
    if time is not None:
        env["t"] = np.float64(time)
    return env


def _check_descriptor_vars(expr: Expr, grid: Grid, time: float | None):
    allowed = set(VARIABLES[: grid.dim])
    if time is not None:
        allowed.add("t")
    extra = expr.free_vars() - allowed
    if extra:
        raise DescriptorError(
            f"descriptor uses {sorted(extra)} but only {sorted(allowed)} are available here"
        )


class ScalarField:
    """A scalar function known on grid nodes, with interpolation off the grid."""

    def __init__(self, grid: Grid, values: np.ndarray, extrapolation: str = "zero"):
        if extrapolation not in EXTRAPOLATION_MODES:
            raise FieldError(f"extrapolation must be one of {EXTRAPOLATION_MODES}")
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != grid.shape:
            raise FieldError(f"values shape {values.shape} does not match grid shape {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise FieldError("field values must be finite")
        self.grid = grid
        self.values = values
        self.extrapolation = extrapolation
        self._derivatives: dict = {}

    @classmethod
    def from_descriptor(cls, grid: Grid, descriptor, extrapolation: str = "zero",
                        time: float | None = None) -> "ScalarField":
        expr = parse_scalar(descriptor) if isinstance(descriptor, str) else descriptor
        _check_descriptor_vars(expr, grid, time)
        env = _descriptor_env(grid, time)
        values = evaluate_on(expr, env).reshape(grid.shape)
        return cls(grid, values, extrapolation)

    @classmethod
    def from_callable(cls, grid: Grid, fn, extrapolation: str = "zero") -> "ScalarField":
        values = np.asarray(fn(np.asarray(grid.nodes())), dtype=np.float64).reshape(grid.shape)
        return cls(grid, values, extrapolation)

    def sample(self, points) -> np.ndarray:
        pts, lead = _normalize_points(points, self.grid.dim)
        out = _sample_values(self.values, self.grid, pts, self.extrapolation)
        return out.reshape(lead)

    def partial_derivative(self, alpha) -> "ScalarField":
        alpha = _check_alpha(alpha, self.grid.dim)
        if sum(alpha) == 0:
            return self
        cached = self._derivatives.get(alpha)
        if cached is None:
            values = _derive_values(self.values, alpha, self.grid.spacing)
            cached = ScalarField(self.grid, values, self.extrapolation)
            self._derivatives[alpha] = cached
        return cached

    def regrid(self, new_grid: Grid) -> "ScalarField":
        if new_grid.dim != self.grid.dim:
            raise FieldError("regrid requires a grid of the same dimension")
        values = self.sample(np.asarray(new_grid.nodes())).reshape(new_grid.shape)
        return ScalarField(new_grid, values, self.extrapolation)

    def components(self) -> list:
        return [self]


class DisplacementField:
    """A displacement ``g`` so that ``x + g(x)`` is a candidate diffeomorphism.

    Values are stored per component with shape ``(dim,) + grid.shape``.
    """

    def __init__(self, grid: Grid, values: np.ndarray, extrapolation: str = "zero"):
        if extrapolation not in EXTRAPOLATION_MODES:
            raise FieldError(f"extrapolation must be one of {EXTRAPOLATION_MODES}")
        values = np.ascontiguousarray(values, dtype=np.float64)
        expected = (grid.dim,) + grid.shape
        if values.shape != expected:
            raise FieldError(f"values shape {values.shape} does not match {expected}")
        if not np.all(np.isfinite(values)):
            raise FieldError("field values must be finite")
        self.grid = grid
        self.values = values
        self.extrapolation = extrapolation
        self._components = [ScalarField(grid, values[i], extrapolation) for i in range(grid.dim)]

    @classmethod
    def from_descriptor(cls, grid: Grid, descriptor, extrapolation: str = "zero",
                        time: float | None = None) -> "DisplacementField":
        exprs = parse_vector(descriptor) if isinstance(descriptor, str) else list(descriptor)
        if len(exprs) != grid.dim:
            raise DescriptorError(
                f"descriptor has {len(exprs)} components but the grid dimension is {grid.dim}"
            )
        env = _descriptor_env(grid, time)
        rows = []
        for expr in exprs:
            _check_descriptor_vars(expr, grid, time)
            rows.append(evaluate_on(expr, env).reshape(grid.shape))
        return cls(grid, np.stack(rows), extrapolation)

    @classmethod
    def from_callable(cls, grid: Grid, fn, extrapolation: str = "zero") -> "DisplacementField":
        out = np.asarray(fn(np.asarray(grid.nodes())), dtype=np.float64)
        values = out.T.reshape((grid.dim,) + grid.shape)
        return cls(grid, values, extrapolation)

    @classmethod
    def zero(cls, grid: Grid, extrapolation: str = "zero") -> "DisplacementField":
        return cls(grid, np.zeros((grid.dim,) + grid.shape), extrapolation)

    def component(self, i: int) -> ScalarField:
        return self._components[i]

    def components(self) -> list:
        return list(self._components)

    def sample(self, points) -> np.ndarray:
        pts, lead = _normalize_points(points, self.grid.dim)
        out = np.stack(
            [_sample_values(self.values[i], self.grid, pts, self.extrapolation)
             for i in range(self.grid.dim)],
            axis=-1,
        )
        return out.reshape(lead + (self.grid.dim,))

    def partial_derivative(self, alpha) -> "DisplacementField":
        alpha = _check_alpha(alpha, self.grid.dim)
        if sum(alpha) == 0:
            return self
        rows = [self._components[i].partial_derivative(alpha).values for i in range(self.grid.dim)]
        return DisplacementField(self.grid, np.stack(rows), self.extrapolation)

    def jacobian_grid(self) -> np.ndarray:
        """Node-wise Jacobian of the displacement, shape ``(dim, dim) + grid.shape``."""
        dim = self.grid.dim
        out = np.empty((dim, dim) + self.grid.shape)
        for i in range(dim):
            for j in range(dim):
                alpha = tuple(1 if k == j else 0 for k in range(dim))
                out[i, j] = self._components[i].partial_derivative(alpha).values
        return out

    def jacobian_at(self, points) -> np.ndarray:
        """Interpolated displacement Jacobian, shape ``points.shape[:-1] + (dim, dim)``."""
        pts, lead = _normalize_points(points, self.grid.dim)
        dim = self.grid.dim
        out = np.empty((pts.shape[0], dim, dim))
        for i in range(dim):
            comp = self._components[i]
            for j in range(dim):
                alpha = tuple(1 if k == j else 0 for k in range(dim))
                out[:, i, j] = comp.partial_derivative(alpha).sample(pts)
        return out.reshape(lead + (dim, dim))

    def regrid(self, new_grid: Grid) -> "DisplacementField":
        if new_grid.dim != self.grid.dim:
            raise FieldError("regrid requires a grid of the same dimension")
        pts = np.asarray(new_grid.nodes())
        rows = [
            _sample_values(self.values[i], self.grid, pts, self.extrapolation).reshape(new_grid.shape)
            for i in range(self.grid.dim)
        ]
        return DisplacementField(new_grid, np.stack(rows), self.extrapolation)


def sample(descriptor, grid: Grid, extrapolation: str = "zero", time: float | None = None):
    """Evaluate a closed-form descriptor on the grid.

    A descriptor with one component yields a :class:`ScalarField`; one with
    ``grid.dim`` comma-separated components yields a :class:`DisplacementField`.
    """
    exprs = parse_vector(descriptor) if isinstance(descriptor, str) else list(descriptor)
    if len(exprs) == 1:
        return ScalarField.from_descriptor(grid, exprs[0], extrapolation, time)
    return DisplacementField.from_descriptor(grid, exprs, extrapolation, time)


def partial_derivative(field, alpha):
    """Stencil derivative ``d^alpha`` of a scalar or displacement field."""
    if not isinstance(field, (ScalarField, DisplacementField)):
        raise FieldError(f"expected a field, got {type(field).__name__}")
    return field.partial_derivative(_as_alpha(alpha, field.grid.dim))


def resample(field, points) -> np.ndarray:
    """Interpolate a field at arbitrary points (cubic Lagrange, per axis)."""
    if not isinstance(field, (ScalarField, DisplacementField)):
        raise FieldError(f"expected a field, got {type(field).__name__}")
    return field.sample(points)


def _as_alpha(alpha, dim: int) -> tuple:
    if isinstance(alpha, (int, np.integer)):
        if dim != 1:
            raise FieldError("a bare integer multi-index is only meaningful in dimension 1")
        alpha = (int(alpha),)
    return _check_alpha(alpha, dim)


def _alpha_magnitude(field, alpha: tuple) -> np.ndarray:
    """Node-wise Euclidean magnitude of ``d^alpha f`` (plain ``|.|`` for scalars)."""
    if isinstance(field, ScalarField):
        return np.abs(field.partial_derivative(alpha).values)
    if isinstance(field, DisplacementField):
        dv = field.partial_derivative(alpha).values
        return np.sqrt(np.sum(dv * dv, axis=0))
    raise FieldError(f"expected a field, got {type(field).__name__}")


def weight_factor(grid: Grid, m: int) -> np.ndarray:
    """Polynomial weight ``(1 + |x|^2)^m`` on grid nodes, shaped like the grid."""
    nodes = np.asarray(grid.nodes())
    factor = (1.0 + np.sum(nodes ** 2, axis=1)) ** m
    return factor.reshape(grid.shape)


def sup_seminorm(field, alpha) -> float:
    """Largest node magnitude of the single derivative ``d^alpha f``."""
    alpha = _as_alpha(alpha, field.grid.dim)
    return float(np.max(_alpha_magnitude(field, alpha)))


def weighted_seminorm(field, alpha, m: int = 0) -> float:
    """Sup of ``(1 + |x|^2)^m |d^alpha f(x)|`` over grid nodes."""
    alpha = _as_alpha(alpha, field.grid.dim)
    if m == 0:
        return sup_seminorm(field, alpha)
    return float(np.max(weight_factor(field.grid, int(m)) * _alpha_magnitude(field, alpha)))


def _trapezoid_weights(grid: Grid) -> np.ndarray:
    w1 = np.ones(grid.points_per_axis)
    w1[0] = w1[-1] = 0.5
    w = w1
    for _ in range(grid.dim - 1):
        w = np.multiply.outer(w, w1)
    return w * grid.spacing ** grid.dim


def sobolev_seminorm(field, alpha) -> float:
    """L2 norm of the single derivative ``d^alpha f`` over the box.

    Trapezoid quadrature on the grid; for fields that decay before the
    boundary this is accurate to well beyond the stencil order.
    """
    alpha = _as_alpha(alpha, field.grid.dim)
    quad = _trapezoid_weights(field.grid)
    mag = _alpha_magnitude(field, alpha)
    return float(np.sqrt(np.sum(quad * mag * mag)))
