"""Flows of time-dependent vector fields, with the bounds that certify them.

``evolve`` integrates, node by node with classical RK4,

    d/dt [x + f(t, x)] = X(t, x + f(t, x)),    f(0, x) = 0,

so ``x + f(t, x)`` follows the trajectory through ``x``. Alongside each
trajectory it integrates ``b(t, x) = int_0^t |X(s, y(s, x))| ds`` with the
same RK4 stages; since ``|y(t) - x| <= b(t, x)`` holds pathwise, comparing
the two certifies the displacement bound without a second quadrature error
budget (for a one-signed scalar field the two integrals agree bitwise).
Separate helpers check the Bellman-Gronwall envelope for the growth of
``d_x f``, track Sobolev norms and box stability, recover the driving field
from the flow via the right logarithmic derivative, and probe smoothness of
the parametrized flow map ``s -> flow(X_s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .decay import DecayClass, class_from_name, classify_decay, extrapolation_for
from .descriptors import VARIABLES, parse_vector
from .errors import DescriptorError, FieldError, FlowBlowupError, FlowDomainError
from .fields import DisplacementField, Grid, multi_indices_up_to, sobolev_seminorm
from .group import DEFAULT_DET_THRESHOLD, Diffeo, invert
from .util import map_node_chunks, max_threads

BOUND_SLACK = 1.0e-8
GRONWALL_REL_SLACK = 1.0e-6
GRONWALL_ABS_SLACK = 1.0e-8
DOMAIN_OVERHANG_FRACTION = 0.1
EDGE_ANNULUS_FRACTION = 0.875
EDGE_DECAY_TOL = 1.0e-6


class TimeDependentVectorField:
    """A vector field ``X(t, x)`` with a decay class and a time interval.

    The class applies to every time slice; the constructor records the claim
    and :func:`diffeoflow.group.membership_check` on a slice verifies it.
    """

    def __init__(self, dim: int, fn, decay_class: DecayClass | None = None,
                 t_domain: tuple | None = None, jacobian_fn=None,
                 description: str = ""):
        if dim not in (1, 2, 3):
            raise FieldError(f"dim must be 1, 2 or 3, got {dim}")
        self.dim = dim
        self._fn = fn
        self._jac_fn = jacobian_fn
        self.decay_class = None if decay_class is None else class_from_name(decay_class)
        if t_domain is not None:
            t_domain = (float(t_domain[0]), float(t_domain[1]))
            if not t_domain[0] <= t_domain[1]:
                raise FieldError(f"empty time domain {t_domain}")
        self.t_domain = t_domain
        self.description = description

    @classmethod
    def from_descriptor(cls, dim: int, descriptor: str,
                        decay_class: DecayClass | None = None,
                        t_domain: tuple | None = None) -> "TimeDependentVectorField":
        exprs = parse_vector(descriptor)
        if len(exprs) != dim:
            raise DescriptorError(
                f"descriptor has {len(exprs)} components but dim is {dim}"
            )
        allowed = set(VARIABLES[:dim]) | {"t"}
        for expr in exprs:
            extra = expr.free_vars() - allowed
            if extra:
                raise DescriptorError(
                    f"descriptor uses {sorted(extra)} but only {sorted(allowed)} are available"
                )
        diffs = [[expr.diff(VARIABLES[j]) for j in range(dim)] for expr in exprs]

        def fn(t, points):
            env = {VARIABLES[j]: points[:, j] for j in range(dim)}
            env["t"] = np.float64(t)
            out = np.empty_like(points)
            for j, expr in enumerate(exprs):
                value = np.asarray(expr.evaluate(env), dtype=np.float64)
                out[:, j] = np.broadcast_to(value, (points.shape[0],))
            return out

        def jac_fn(t, points):
            env = {VARIABLES[j]: points[:, j] for j in range(dim)}
            env["t"] = np.float64(t)
            out = np.empty(points.shape[:1] + (dim, dim))
            for i in range(dim):
                for j in range(dim):
                    value = np.asarray(diffs[i][j].evaluate(env), dtype=np.float64)
                    out[:, i, j] = np.broadcast_to(value, (points.shape[0],))
            return out

        return cls(dim, fn, decay_class, t_domain, jac_fn, descriptor)

    @classmethod
    def from_displacement(cls, displacement: DisplacementField,
                          decay_class: DecayClass | None = None,
                          t_domain: tuple | None = None) -> "TimeDependentVectorField":
        """Autonomous field backed by grid data (interpolated off the grid)."""

        def fn(t, points):
            return displacement.sample(points)

        def jac_fn(t, points):
            return displacement.jacobian_at(points)

        return cls(displacement.grid.dim, fn, decay_class, t_domain, jac_fn, "grid data")

    def __call__(self, t: float, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        out = np.asarray(self._fn(float(t), pts), dtype=np.float64)
        if out.shape != pts.shape:
            raise FieldError(f"vector field returned shape {out.shape} for {pts.shape}")
        return out

    def jacobian(self, t: float, points: np.ndarray,
                 grid: Grid | None = None) -> np.ndarray:
        """Spatial Jacobian ``d_x X(t, .)`` at the given points.

        Descriptor- and grid-backed fields differentiate exactly or by
        stencil respectively; a bare closure needs ``grid`` so a slice can
        be sampled and differenced.
        """
        pts = np.asarray(points, dtype=np.float64)
        if self._jac_fn is not None:
            return np.asarray(self._jac_fn(float(t), pts), dtype=np.float64)
        if grid is None:
            raise FieldError(
                "this vector field has no analytic Jacobian; pass a grid to difference on"
            )
        extrap = "zero" if self.decay_class is None else extrapolation_for(self.decay_class)
        return self.at_time(grid, t, extrap).jacobian_at(pts)

    def at_time(self, grid: Grid, t: float,
                extrapolation: str | None = None) -> DisplacementField:
        """Snapshot of the field on grid nodes at one time."""
        if extrapolation is None:
            extrapolation = ("zero" if self.decay_class is None
                             else extrapolation_for(self.decay_class))
        values = self(t, np.asarray(grid.nodes()))
        return DisplacementField(grid, values.T.reshape((grid.dim,) + grid.shape),
                                 extrapolation)

    def scaled(self, factor: float) -> "TimeDependentVectorField":
        factor = float(factor)
        jac = None
        if self._jac_fn is not None:
            inner_jac = self._jac_fn
            jac = lambda t, pts: factor * inner_jac(t, pts)
        return TimeDependentVectorField(
            self.dim,
            lambda t, pts, f=self._fn: factor * f(t, pts),
            self.decay_class,
            self.t_domain,
            jac,
            f"{factor} * ({self.description})",
        )

    def time_shifted(self, t0: float) -> "TimeDependentVectorField":
        """The field ``(t, x) -> X(t0 + t, x)`` with its domain shifted back."""
        t0 = float(t0)
        jac = None
        if self._jac_fn is not None:
            inner_jac = self._jac_fn
            jac = lambda t, pts: inner_jac(t0 + t, pts)
        domain = None
        if self.t_domain is not None:
            domain = (self.t_domain[0] - t0, self.t_domain[1] - t0)
        return TimeDependentVectorField(
            self.dim,
            lambda t, pts, f=self._fn: f(t0 + t, pts),
            self.decay_class,
            domain,
            jac,
            f"({self.description}) shifted by {t0}",
        )


def as_vector_field(source) -> TimeDependentVectorField:
    if isinstance(source, TimeDependentVectorField):
        return source
    if isinstance(source, DisplacementField):
        return TimeDependentVectorField.from_displacement(source)
    raise FieldError(f"cannot treat {type(source).__name__} as a vector field")


@dataclass
class FlowResult:
    """Everything one evolution run produced.

    ``times`` has one entry per RK4 step boundary and ``snapshots`` one
    ``(time, DisplacementField)`` pair per recorded boundary (every step by
    default). ``diagnostics`` holds per-boundary curves: the displacement
    sup, the certified bound sup and its worst signed defect, the Jacobian
    sup and minimum determinant of ``I + d_x f``, and the Gronwall data
    ``beta`` (sup of ``|d_x X|`` along trajectories) with its cumulative
    integral ``alpha``.
    """

    grid: Grid
    decay_class: DecayClass | None
    t_final: float
    dt: float
    times: np.ndarray
    snapshots: list
    diagnostics: dict
    final_displacement: DisplacementField
    final_bound: np.ndarray
    notes: list = dataclass_field(default_factory=list)

    def to_diffeo(self, det_threshold: float = DEFAULT_DET_THRESHOLD) -> Diffeo:
        return Diffeo(self.final_displacement, self.decay_class, det_threshold)

    def snapshot_values(self) -> np.ndarray:
        """Stacked snapshot displacements, shape ``(len(snapshots), nodes, dim)``."""
        return np.stack([
            disp.values.reshape(self.grid.dim, -1).T for _, disp in self.snapshots
        ])


def _pointwise_norm(vectors: np.ndarray) -> np.ndarray:
    # dim 1 uses abs so the certified bound reproduces the trajectory
    # arithmetic exactly for one-signed fields
    if vectors.shape[1] == 1:
        return np.abs(vectors[:, 0])
    return np.sqrt(np.sum(vectors * vectors, axis=1))


def _spectral_sup(mats: np.ndarray) -> float:
    """Largest spectral norm in a batch of small matrices."""
    if mats.shape[-1] == 1:
        return float(np.max(np.abs(mats)))
    return float(np.max(np.linalg.svd(mats, compute_uv=False)[..., 0]))


def _jacobian_stats(displacement: DisplacementField) -> tuple:
    """Stencil ``(sup |d_x f|, min det(I + d_x f))`` over the grid."""
    grid = displacement.grid
    jac = displacement.jacobian_grid().reshape(grid.dim, grid.dim, -1)
    mats = np.moveaxis(jac, 2, 0)
    sup = _spectral_sup(mats)
    dets = np.linalg.det(mats + np.eye(grid.dim))
    return sup, float(np.min(dets))


def evolve(source, t_final: float, dt: float, grid: Grid,
           decay_class: DecayClass | None = None,
           snapshot_stride: int = 1) -> FlowResult:
    """Flow the identity along ``X`` from time 0 to ``t_final``.

    ``dt`` is a target step; the actual step divides ``t_final`` exactly.
    Trajectories that leave the box by more than a tenth of the half-width
    raise a domain error (the grid cannot resolve them), and non-finite
    values raise a blow-up error. The result's decay class comes from the
    field unless overridden; with neither, the final snapshot is classified.
    """
    vf = as_vector_field(source)
    if vf.dim != grid.dim:
        raise FieldError(f"vector field dim {vf.dim} does not match grid dim {grid.dim}")
    if not (t_final > 0.0 and np.isfinite(t_final)):
        raise FlowDomainError(f"t_final must be positive and finite, got {t_final}")
    if not (dt > 0.0 and np.isfinite(dt)):
        raise FlowDomainError(f"dt must be positive and finite, got {dt}")
    if vf.t_domain is not None:
        lo, hi = vf.t_domain
        if 0.0 < lo - 1.0e-12 or t_final > hi + 1.0e-12:
            raise FlowDomainError(
                f"the field is declared on t in [{lo}, {hi}], cannot flow over [0, {t_final}]"
            )
    if decay_class is None:
        decay_class = vf.decay_class
    n_steps = max(1, int(math.ceil(t_final / dt - 1.0e-12)))
    step = t_final / n_steps
    if snapshot_stride < 1:
        raise FlowDomainError(f"snapshot_stride must be positive, got {snapshot_stride}")

    extrap = "zero" if decay_class is None else extrapolation_for(decay_class)
    nodes = np.asarray(grid.nodes())
    m = nodes.shape[0]
    y = nodes.copy()
    bound = np.zeros(m)
    exit_limit = (1.0 + DOMAIN_OVERHANG_FRACTION) * grid.half_width

    threads = max_threads()

    def field_at(t, pts):
        if threads > 1:
            return map_node_chunks(lambda chunk: vf(t, chunk), pts, threads)
        return vf(t, pts)

    times = np.linspace(0.0, t_final, n_steps + 1)
    sup_disp = np.zeros(n_steps + 1)
    bound_sup = np.zeros(n_steps + 1)
    bound_defect = np.zeros(n_steps + 1)
    sup_jac = np.zeros(n_steps + 1)
    min_det = np.ones(n_steps + 1)
    beta = np.zeros(n_steps + 1)

    def snapshot(vals):
        return DisplacementField(grid, (vals - nodes).T.reshape((grid.dim,) + grid.shape), extrap)

    snapshots = [(0.0, snapshot(y))]
    beta[0] = _spectral_sup(vf.jacobian(0.0, y, grid))

    for k in range(1, n_steps + 1):
        t = times[k - 1]
        k1 = field_at(t, y)
        k2 = field_at(t + 0.5 * step, y + 0.5 * step * k1)
        k3 = field_at(t + 0.5 * step, y + 0.5 * step * k2)
        k4 = field_at(t + step, y + step * k3)
        c1, c2, c3, c4 = (_pointwise_norm(v) for v in (k1, k2, k3, k4))
        y = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        bound = bound + (step / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        t = times[k]

        if not np.all(np.isfinite(y)):
            raise FlowBlowupError(f"trajectories became non-finite by t = {t:.6g}")
        worst = float(np.max(np.abs(y)))
        if worst > exit_limit:
            raise FlowDomainError(
                f"a trajectory reached |x| = {worst:.6g} by t = {t:.6g}, beyond the "
                f"enlarged box {exit_limit:.6g}; the grid does not resolve this flow"
            )

        disp_norm = _pointwise_norm(y - nodes)
        sup_disp[k] = float(np.max(disp_norm))
        bound_sup[k] = float(np.max(bound))
        bound_defect[k] = float(np.max(disp_norm - bound))
        beta[k] = _spectral_sup(vf.jacobian(t, y, grid))

        snap = snapshot(y)
        sup_jac[k], min_det[k] = _jacobian_stats(snap)
        if k % snapshot_stride == 0 or k == n_steps:
            snapshots.append((float(t), snap))

    final_displacement = snapshots[-1][1]
    notes = []
    if decay_class is None:
        report = classify_decay(final_displacement)
        decay_class = report.inferred_class
        notes.append(f"decay class inferred from the final snapshot: {decay_class.value}")
        final_displacement = DisplacementField(
            grid, final_displacement.values, extrapolation_for(decay_class)
        )
        snapshots[-1] = (snapshots[-1][0], final_displacement)

    alpha = _cumulative_trapezoid(times, beta)
    diagnostics = {
        "sup_displacement": sup_disp,
        "bound_sup": bound_sup,
        "bound_defect": bound_defect,
        "sup_jacobian": sup_jac,
        "min_det": min_det,
        "beta": beta,
        "alpha": alpha,
    }
    return FlowResult(
        grid=grid,
        decay_class=decay_class,
        t_final=float(t_final),
        dt=step,
        times=times,
        snapshots=snapshots,
        diagnostics=diagnostics,
        final_displacement=final_displacement,
        final_bound=bound,
        notes=notes,
    )


def _cumulative_trapezoid(times: np.ndarray, rate: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rate)
    increments = 0.5 * (rate[1:] + rate[:-1]) * np.diff(times)
    out[1:] = np.cumsum(increments)
    return out


def displacement_sup_bound(result: FlowResult, source=None) -> tuple:
    """Certify ``sup_x |f(t, x)| <= sup_x int_0^t |X(s, y(s, x))| ds``.

    Returns ``(bound_curve, measured_curve, holds)`` over the step
    boundaries. The bound was accumulated during integration with the same
    RK4 stages as the trajectories (``source`` is accepted for symmetry with
    the other verifiers but adds nothing). ``holds`` demands the stronger
    per-node comparison at every boundary, with a small absolute slack.
    """
    bound_curve = result.diagnostics["bound_sup"].copy()
    measured_curve = result.diagnostics["sup_displacement"].copy()
    holds = bool(float(np.max(result.diagnostics["bound_defect"])) <= BOUND_SLACK)
    return bound_curve, measured_curve, holds


def gronwall_bound(result: FlowResult, source=None) -> tuple:
    """Bellman-Gronwall envelope for the growth of ``d_x f`` along the flow.

    From ``d/dt (d_x f) = d_x X(t, y) (I + d_x f)``, the sup norm of
    ``d_x f(t)`` obeys ``u(t) <= alpha(t) + int_0^t alpha beta exp(int_s^t
    beta) ds`` with ``beta(s) = sup_x |d_x X(s, y(s, x))|`` and ``alpha`` its
    running integral. Returns ``(predicted, measured, holds)`` where
    ``measured`` is the stencil Jacobian sup per step boundary and ``holds``
    allows a relative ``1e-6`` plus absolute ``1e-8`` slack.
    """
    times = result.times
    beta = result.diagnostics["beta"]
    alpha = result.diagnostics["alpha"]
    measured = result.diagnostics["sup_jacobian"].copy()
    big_b = _cumulative_trapezoid(times, beta)
    steps = times.shape[0]
    predicted = np.empty(steps)
    predicted[0] = alpha[0]
    for k in range(1, steps):
        integrand = alpha[: k + 1] * beta[: k + 1] * np.exp(big_b[k] - big_b[: k + 1])
        predicted[k] = alpha[k] + float(np.trapezoid(integrand, times[: k + 1]))
    holds = bool(np.all(measured <= predicted * (1.0 + GRONWALL_REL_SLACK) + GRONWALL_ABS_SLACK))
    return predicted, measured, holds


def sobolev_tracking(result: FlowResult, source=None, p_max: int = 2) -> dict:
    """Sobolev seminorms of the displacement along the flow, with box checks.

    Tracks every derivative through order ``p_max`` at each snapshot, then
    re-measures the final snapshot on a grid of doubled half-width and
    unchanged spacing; for displacement that has decayed inside the original
    box the two values agree closely. Also reports the sup of first
    derivatives over the outermost eighth of the box, which should be tiny
    for the decaying classes.
    """
    grid = result.grid
    alphas = multi_indices_up_to(grid.dim, p_max)
    history = {}
    for alpha in alphas:
        key = ",".join(str(a) for a in alpha)
        history[key] = [
            float(sobolev_seminorm(disp, alpha)) for _, disp in result.snapshots
        ]
    snapshot_times = [float(t) for t, _ in result.snapshots]

    wide_grid = Grid(grid.dim, 2.0 * grid.half_width, 2 * grid.points_per_axis - 1)
    widened = result.final_displacement.regrid(wide_grid)
    final_norms = {}
    wide_norms = {}
    stability_gap = 0.0
    for alpha in alphas:
        key = ",".join(str(a) for a in alpha)
        final_norms[key] = history[key][-1]
        wide_norms[key] = float(sobolev_seminorm(widened, alpha))
        gap = abs(wide_norms[key] - final_norms[key])
        stability_gap = max(stability_gap, gap / max(1.0, final_norms[key]))

    nodes = np.asarray(grid.nodes())
    edge_mask = np.max(np.abs(nodes), axis=1) >= EDGE_ANNULUS_FRACTION * grid.half_width
    final = result.final_displacement
    edge_sup = 0.0
    for j in range(grid.dim):
        alpha = tuple(1 if a == j else 0 for a in range(grid.dim))
        dv = final.partial_derivative(alpha).values.reshape(grid.dim, -1)
        edge_sup = max(edge_sup, float(np.max(np.abs(dv[:, edge_mask]))))

    all_finite = all(np.all(np.isfinite(vals)) for vals in history.values())
    decaying = result.decay_class is not None and result.decay_class is not DecayClass.BOUNDED_ALL
    report = {
        "p_max": int(p_max),
        "times": snapshot_times,
        "history": history,
        "final": final_norms,
        "box_doubled_final": wide_norms,
        "stability_gap": float(stability_gap),
        "edge_annulus_fraction": EDGE_ANNULUS_FRACTION,
        "edge_jacobian_sup": float(edge_sup),
        "finite": bool(all_finite),
        "edge_decayed": bool(edge_sup < EDGE_DECAY_TOL),
        "holds": bool(all_finite and (not decaying or edge_sup < EDGE_DECAY_TOL)),
    }
    if not decaying:
        report["notes"] = ["bounded-class displacement: box stability is not expected"]
    return report


def right_log_derivative(result: FlowResult, times=None) -> list:
    """Recover the driving field from the flow: ``D(t) = (d_t f) o (Id+f)^-1``.

    The time derivative is a five-point stencil across consecutive
    snapshots, so the result lists only interior snapshot times (two steps
    in from either end), optionally restricted to ``times``. Each entry is
    ``(t, DisplacementField)``; for a flow of ``X`` the field approximates
    ``X(t, .)`` to fourth order in both the step and the spacing.
    """
    snaps = result.snapshots
    if len(snaps) != result.times.shape[0]:
        raise FlowDomainError(
            "right_log_derivative needs snapshots at every step "
            "(re-run evolve with snapshot_stride=1)"
        )
    if len(snaps) < 5:
        raise FlowDomainError(
            f"need at least 5 snapshots for the time stencil, have {len(snaps)}"
        )
    grid = result.grid
    nodes = np.asarray(grid.nodes())
    dt = result.dt
    g = result.snapshot_values()
    wanted = None
    if times is not None:
        wanted = [float(t) for t in times]
    out = []
    for k in range(2, len(snaps) - 2):
        t_k = float(result.times[k])
        if wanted is not None and not any(
            abs(t_k - t) <= 1.0e-9 * max(1.0, abs(t)) for t in wanted
        ):
            continue
        dgdt = (g[k - 2] - 8.0 * g[k - 1] + 8.0 * g[k + 1] - g[k + 2]) / (12.0 * dt)
        extrap = snaps[k][1].extrapolation
        dgdt_field = DisplacementField(grid, dgdt.T.reshape((grid.dim,) + grid.shape), extrap)
        inverse = invert(Diffeo(snaps[k][1], result.decay_class, check=False))
        recovered = dgdt_field.sample(inverse.apply(nodes))
        field = DisplacementField(grid, recovered.T.reshape((grid.dim,) + grid.shape), extrap)
        out.append((t_k, field))
    if not out:
        raise FlowDomainError("no interior snapshot matched the requested times")
    return out


def evol_smoothness_probe(family, s_values, t_final: float, dt: float,
                          grid: Grid, decay_class: DecayClass | None = None) -> dict:
    """Difference-quotient probe of the parametrized flow ``s -> flow(X_s)``.

    ``family`` maps a parameter to a vector field; ``s_values`` must list a
    center ``s0`` and symmetric pairs ``s0 +- e/2^k`` for successively
    halved offsets (at least two pairs). First and second central quotients
    of the time-``t_final`` displacement are formed at each offset; their
    successive gaps shrink at order 2 when the flow map is twice
    differentiable in ``s``, and the probe demands order at least 1.5.
    """
    s_sorted = sorted(float(s) for s in s_values)
    if len(s_sorted) < 5 or len(s_sorted) % 2 == 0:
        raise FlowDomainError(
            "s_values must hold a center and at least two symmetric offset pairs"
        )
    mid = len(s_sorted) // 2
    s0 = s_sorted[mid]
    # index pairs by offset; never rebuild s0 +- h, whose rounding can differ
    # from the caller's values
    pairs = {}
    for i in range(1, mid + 1):
        below, above = s_sorted[mid - i], s_sorted[mid + i]
        h = above - s0
        if h <= 0.0 or abs((s0 - below) - h) > 1.0e-9 * max(1.0, h):
            raise FlowDomainError(f"s_values are not symmetric around {s0}")
        pairs[h] = (below, above)
    offsets = sorted(pairs, reverse=True)
    for big, small in zip(offsets, offsets[1:]):
        if abs(big - 2.0 * small) > 1.0e-9 * big:
            raise FlowDomainError("offsets must halve from one pair to the next")

    finals = {}
    for s in s_sorted:
        res = evolve(family(s), t_final, dt, grid, decay_class=decay_class,
                     snapshot_stride=10 ** 9)
        finals[s] = res.final_displacement.values

    def sup(a):
        return float(np.max(np.abs(a)))

    first = {h: (finals[pairs[h][1]] - finals[pairs[h][0]]) / (2.0 * h)
             for h in offsets}
    second = {h: (finals[pairs[h][1]] - 2.0 * finals[s0] + finals[pairs[h][0]])
              / (h * h) for h in offsets}
    first_gaps = [sup(first[a] - first[b]) for a, b in zip(offsets, offsets[1:])]
    second_gaps = [sup(second[a] - second[b]) for a, b in zip(offsets, offsets[1:])]

    def orders(gaps):
        out = []
        for big, small in zip(gaps, gaps[1:]):
            if small == 0.0:
                out.append(float("inf"))
            elif big == 0.0:
                out.append(0.0)
            else:
                out.append(float(np.log2(big / small)))
        return out

    first_orders = orders(first_gaps)
    second_orders = orders(second_gaps)
    # with a single gap pair there is no ratio to take; accept only if the
    # gap already sits at the rounding floor
    floor = 1.0e-12 * max(1.0, max(sup(v) for v in finals.values()))

    def converges(gaps, measured_orders):
        if measured_orders:
            return all(o >= 1.5 for o in measured_orders)
        return gaps[-1] <= floor

    holds = converges(first_gaps, first_orders) and converges(second_gaps, second_orders)
    return {
        "s_center": s0,
        "offsets": offsets,
        "first_gaps": first_gaps,
        "second_gaps": second_gaps,
        "first_orders": first_orders,
        "second_orders": second_orders,
        "first_sup": sup(first[offsets[-1]]),
        "second_sup": sup(second[offsets[-1]]),
        "holds": bool(holds),
    }
