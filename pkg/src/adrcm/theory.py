"""Closed-form targets and Monte Carlo estimators used as ground truth.

Neighborhood intensities and the pair-overlap kernel have exact expressions;
the limiting covariance density and the difference-moment integrals are
estimated by Palm sampling: a deterministic extra point is inserted into
fresh configurations and local counts are averaged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .cliques import (
    count_cliques_centered,
    diff1_clique_upto,
    diff2_clique_upto,
    joint_clique_counts,
)
from .model import (
    MarkedPoint,
    ModelParams,
    ParameterError,
    add_point,
    derive_seed,
    sample_config,
)

__all__ = [
    "RegimeError",
    "MARK_FLOOR",
    "RateExponents",
    "rate_exponents",
    "TheoryTargets",
    "theory_targets",
    "lambda_up",
    "lambda_down",
    "c_plus",
    "s_wedge",
    "SigmaEstimate",
    "sigma_palm",
    "sigma_direct_from_samples",
    "GammaDiagnostics",
    "gamma_diagnostics",
    "neighborhood_counts",
    "MomentProfile",
    "clique_diff_moment_profile",
    "tree_root_moment_profile",
    "log_slope",
]

# Palm points never carry a mark below this floor; the induced truncation is
# reported alongside every estimate that uses it.  At 1e-5 the omitted tail of
# the u^(-2 gamma)-type integrands stays well below the Monte Carlo standard
# errors for every gamma < 1/2.
MARK_FLOOR = 1e-5


class RegimeError(ParameterError):
    """The requested quantity is undefined in this parameter regime."""


@dataclass(frozen=True)
class RateExponents:
    """Rate exponents controlling covariance convergence and moment bounds."""

    gamma: float
    zeta: float
    tau: float
    eta: float

    def __post_init__(self) -> None:
        limit = max(2.0 * self.gamma, 1.0 - self.gamma)
        if not (1.0 < self.eta < 2.0 and self.eta * limit < 1.0):
            raise RegimeError(
                f"eta={self.eta} infeasible; needs eta in (1, {min(2.0, 1.0 / limit)})"
            )


def rate_exponents(gamma: float, eta: float | None = None) -> RateExponents:
    """Exponents zeta, tau and a feasible eta for the finite-variance regime."""
    if not (0.0 < gamma < 0.5):
        raise RegimeError(f"rate exponents need gamma in (0, 1/2), got {gamma}")
    zeta = min(1.0 - gamma, (1.0 - 2.0 * gamma) / gamma)
    tau = max(gamma, 1.0 - 2.0 * gamma)
    limit = max(2.0 * gamma, 1.0 - gamma)
    upper = min(2.0, 1.0 / limit)
    if eta is None:
        eta = 0.5 * (1.0 + upper)
    return RateExponents(gamma=gamma, zeta=zeta, tau=tau, eta=eta)


def lambda_up(u: float, params: ModelParams) -> float:
    """Mean number of higher-mark neighbors of a point with mark u.

    Exact infinite-volume value (2 beta / gamma) (u^-gamma - 1); the small-u
    coefficient is :func:`c_plus`.
    """
    if not (0.0 < u <= 1.0):
        raise ParameterError(f"mark must lie in (0, 1], got {u}")
    g = params.gamma
    return (2.0 * params.beta / g) * (u**-g - 1.0)


def c_plus(params: ModelParams) -> float:
    """Leading coefficient of the higher-mark neighborhood intensity."""
    return 2.0 * params.beta / params.gamma


def lambda_down(params: ModelParams) -> float:
    """Mean number of lower-mark neighbors; independent of the mark."""
    return 2.0 * params.beta / (1.0 - params.gamma)


def s_wedge(u: float, r: float, gamma: float) -> float:
    """Overlap kernel min(1, (u^gamma r)^(-1/(1-gamma))) 1{r <= 2/u}.

    Normalized to beta = 1.  Bounds the probability that points at distance r
    share a higher-mark neighbor with a point of mark u.
    """
    if not (0.0 < u <= 1.0):
        raise ParameterError(f"mark must lie in (0, 1], got {u}")
    if r < 0.0:
        raise ParameterError(f"distance must be nonnegative, got {r}")
    if r > 2.0 / u:
        return 0.0
    if r == 0.0:
        return 1.0
    return min(1.0, (u**gamma * r) ** (-1.0 / (1.0 - gamma)))


@dataclass(frozen=True)
class TheoryTargets:
    """Bundle of closed-form targets for one (params, u) pair."""

    lambda_up: float
    lambda_down: float
    c_plus: float
    zeta: float
    tau: float


def theory_targets(params: ModelParams, u: float) -> TheoryTargets:
    exps = rate_exponents(params.gamma)
    return TheoryTargets(
        lambda_up=lambda_up(u, params),
        lambda_down=lambda_down(params),
        c_plus=c_plus(params),
        zeta=exps.zeta,
        tau=exps.tau,
    )


# -- limiting covariance density -------------------------------------------


@dataclass(frozen=True)
class SigmaEstimate:
    """Estimate of the per-unit-length limiting clique covariance."""

    value: float
    std_error: float
    method: str  # "palm-formula" | "direct-covariance"
    components: tuple[float, float] | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.std_error > 0.0:
            raise ParameterError("std_error must be positive")
        if self.method == "palm-formula":
            t1, t2 = self.components
            if not math.isclose(t1 + t2, self.value, rel_tol=1e-12, abs_tol=1e-12):
                raise ParameterError("palm components must sum to the value")


def _window_half_width(params: ModelParams) -> float:
    return max(64.0, 8.0 * params.beta * MARK_FLOOR**-params.gamma)


def _single_term_sample(args) -> float:
    base, k, l, floor_width, seed = args
    rng = np.random.Generator(np.random.Philox(key=seed))
    u = rng.uniform(MARK_FLOOR, 1.0)
    # Every member of a clique centered at (0, u) connects to it, hence lies
    # within beta/u; a torus of four times that radius reproduces the
    # infinite-volume count exactly in law.
    torus = max(floor_width, 4.0 * base.beta / u)
    params = ModelParams(base.gamma, base.beta, torus)
    config = sample_config(params, derive_seed(seed, 1))
    palm = MarkedPoint(0.0, u)
    aug = add_point(config, palm)
    ck = count_cliques_centered(aug, palm, k)
    cl = ck if l == k else count_cliques_centered(aug, palm, l)
    return float(ck * cl)


def _joint_term_sample(args) -> tuple[float, float, float]:
    base, k, l, half, floor_width, seed = args
    rng = np.random.Generator(np.random.Philox(key=seed))
    u = rng.uniform(MARK_FLOOR, 1.0)
    v = rng.uniform(MARK_FLOOR, 1.0)
    y = rng.uniform(-half, half)
    # All relevant points sit within max(beta/u, |y| + beta/v) of the origin.
    reach = max(base.beta / u, abs(y) + base.beta / v)
    torus = max(floor_width, 4.0 * reach)
    params = ModelParams(base.gamma, base.beta, torus)
    config = sample_config(params, derive_seed(seed, 1))
    palm = MarkedPoint(0.0, u)
    other = MarkedPoint(y, v)
    aug = add_point(add_point(config, palm), other)
    pairs, unions = joint_clique_counts(aug, palm, other, k, l)
    return float(pairs), float(unions), abs(y)


def sigma_palm(
    params: ModelParams,
    k: int,
    l: int,
    mc_budget: int,
    window_half_width: float | None = None,
    seed: int = 0,
    threads: int = 1,
) -> SigmaEstimate:
    """Two-term Palm-formula estimate of the limiting covariance density.

    Term one averages products of centered clique counts at a uniformly marked
    extra point; term two integrates the joint-clique count over a second
    point placed uniformly in a box of half-width L around the first, scaled
    by the box measure.  Infinite volume is realized by per-sample tori large
    enough to contain every point that can enter the counted structures, so
    the only systematic truncation left is the reported mark floor.
    """
    if params.gamma >= 0.5:
        raise RegimeError(
            f"finite-variance regime needs gamma < 1/2, got {params.gamma}"
        )
    if k < 1 or l < 1:
        raise ParameterError("clique sizes must be >= 1")
    if mc_budget < 8:
        raise ParameterError("mc_budget too small")
    w = _window_half_width(params)
    big_l = float(window_half_width) if window_half_width is not None else w
    if big_l <= 0.0:
        raise ParameterError("window_half_width must be positive")

    n_single = max(2, mc_budget // 4)
    n_joint = max(2, mc_budget - n_single)
    mass = 1.0 - MARK_FLOOR

    base = ModelParams(params.gamma, params.beta, params.torus_length)
    tasks1 = [
        (base, k, l, 2.0 * w, derive_seed(seed, 1, i)) for i in range(n_single)
    ]
    vals1 = np.asarray(parallel_map(_single_term_sample, tasks1, threads))
    term1 = mass * float(vals1.mean())
    se1 = mass * float(vals1.std(ddof=1) / math.sqrt(n_single))

    # The second point is drawn from a box twice as wide as L so that the
    # sensitivity of the truncated integral to 2L comes from the same stream.
    domain_half = 2.0 * big_l
    tasks2 = [
        (base, k, l, domain_half, 2.0 * w, derive_seed(seed, 2, i))
        for i in range(n_joint)
    ]
    out = parallel_map(_joint_term_sample, tasks2, threads)
    pairs = np.asarray([o[0] for o in out])
    unions = np.asarray([o[1] for o in out])
    dist = np.asarray([o[2] for o in out])
    scale = mass * mass * 2.0 * domain_half

    def joint_estimate(values: np.ndarray, limit: float) -> tuple[float, float]:
        inside = values * (dist <= limit)
        est = scale * float(inside.mean())
        se = scale * float(inside.std(ddof=1) / math.sqrt(inside.size))
        return est, se

    term2, se2 = joint_estimate(pairs, big_l)
    term2_unions, _ = joint_estimate(unions, big_l)
    sens = {
        "half_L": term1 + joint_estimate(pairs, 0.5 * big_l)[0],
        "double_L": term1 + joint_estimate(pairs, 2.0 * big_l)[0],
    }

    std_error = math.hypot(se1, se2)
    if std_error == 0.0:
        # Degenerate constant integrand: the mark-floor truncation is the
        # only remaining uncertainty.
        std_error = MARK_FLOOR
    return SigmaEstimate(
        value=term1 + term2,
        std_error=std_error,
        method="palm-formula",
        components=(term1, term2),
        details={
            "k": k,
            "l": l,
            "mark_floor": MARK_FLOOR,
            "window_half_width": w,
            "L": big_l,
            "adaptive_window": "torus = max(2W, 4*reach(marks))",
            "samples": (n_single, n_joint),
            "sensitivity": sens,
            "term2_distinct_unions": term2_unions,
            "joint_convention": "ordered-pairs",
        },
    )


def sigma_direct_from_samples(
    samples_k: np.ndarray, samples_l: np.ndarray, torus_length: float
) -> SigmaEstimate:
    """Direct replicate-based estimate Cov(totals_k, totals_l) / n.

    Standard error by leave-one-batch-out jackknife over replicates.
    """
    xs = np.asarray(samples_k, dtype=np.float64)
    ys = np.asarray(samples_l, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 4:
        raise ParameterError("need two aligned sample vectors of length >= 4")

    def stat(mask: np.ndarray) -> float:
        a, b = xs[mask], ys[mask]
        return float(np.cov(a, b, ddof=1)[0, 1] / torus_length)

    r = xs.size
    batches = min(20, r)
    bounds = np.linspace(0, r, batches + 1, dtype=int)
    estimates = []
    for i in range(batches):
        keep = np.ones(r, dtype=bool)
        keep[bounds[i] : bounds[i + 1]] = False
        estimates.append(stat(keep))
    est_arr = np.asarray(estimates)
    se = float(np.sqrt((batches - 1) / batches * np.sum((est_arr - est_arr.mean()) ** 2)))
    return SigmaEstimate(
        value=stat(np.ones(r, dtype=bool)),
        std_error=max(se, np.finfo(float).tiny),
        method="direct-covariance",
        details={"replicates": r, "torus_length": torus_length},
    )


# -- Palm sampling of neighborhoods and difference moments -------------------


def _neighborhood_sample(args) -> tuple[int, int]:
    params, u, seed = args
    from .model import down_neighbors, up_neighbors  # local to keep pickling light

    config = sample_config(params, seed)
    palm = MarkedPoint(0.0, u)
    return int(up_neighbors(config, palm).size), int(down_neighbors(config, palm).size)


def neighborhood_counts(
    params: ModelParams,
    u: float,
    replicates: int,
    seed: int = 0,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Higher/lower-mark neighbor counts of (0, u) over fresh configurations."""
    tasks = [(params, u, derive_seed(seed, 0, i)) for i in range(replicates)]
    out = parallel_map(_neighborhood_sample, tasks, threads)
    ups = np.asarray([o[0] for o in out], dtype=np.int64)
    downs = np.asarray([o[1] for o in out], dtype=np.int64)
    return ups, downs


@dataclass(frozen=True)
class MomentProfile:
    """Estimated Palm moments across a grid of marks."""

    u_grid: tuple[float, ...]
    moments: np.ndarray
    std_errors: np.ndarray
    power: float
    label: str

    @property
    def slope(self) -> float:
        return log_slope(self.u_grid, self.moments)


def log_slope(u_grid, values) -> float:
    """Least-squares slope of log(values) against log(1/u)."""
    x = np.log(1.0 / np.asarray(u_grid, dtype=np.float64))
    y = np.log(np.asarray(values, dtype=np.float64))
    if np.any(~np.isfinite(y)):
        raise ParameterError("moment estimates must be positive for a log slope")
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def _clique_diff_sample(args) -> float:
    params, u, k, power, seed = args
    from .cliques import diff1_clique

    config = sample_config(params, seed)
    return float(diff1_clique(config, u, k)) ** power


def _tree_root_sample(args) -> float:
    params, u, spec, power, seed = args
    from .trees import d_in

    config = sample_config(params, seed)
    return float(d_in(config, MarkedPoint(0.0, u), spec)) ** power


def _profile(task_fn, tasks_per_u, u_grid, power, label, threads) -> MomentProfile:
    means = np.empty(len(u_grid))
    ses = np.empty(len(u_grid))
    for i, tasks in enumerate(tasks_per_u):
        vals = np.asarray(parallel_map(task_fn, tasks, threads))
        means[i] = vals.mean()
        ses[i] = vals.std(ddof=1) / math.sqrt(vals.size)
    return MomentProfile(
        u_grid=tuple(float(u) for u in u_grid),
        moments=means,
        std_errors=ses,
        power=power,
        label=label,
    )


def clique_diff_moment_profile(
    params: ModelParams,
    k: int,
    u_grid,
    replicates: int,
    power: float = 2.0,
    seed: int = 0,
    threads: int = 1,
) -> MomentProfile:
    """E[(add-one clique difference)^power] at each mark of the grid."""
    tasks_per_u = [
        [(params, float(u), k, power, derive_seed(seed, 7, gi, i)) for i in range(replicates)]
        for gi, u in enumerate(u_grid)
    ]
    return _profile(_clique_diff_sample, tasks_per_u, u_grid, power, f"diff1_k{k}", threads)


def tree_root_moment_profile(
    params: ModelParams,
    spec,
    u_grid,
    replicates: int,
    power: float = 1.0,
    seed: int = 0,
    threads: int = 1,
) -> MomentProfile:
    """E[(rooted embedding count)^power] at each mark of the grid."""
    tasks_per_u = [
        [(params, float(u), spec, power, derive_seed(seed, 8, gi, i)) for i in range(replicates)]
        for gi, u in enumerate(u_grid)
    ]
    return _profile(_tree_root_sample, tasks_per_u, u_grid, power, "tree_root", threads)


# -- difference-moment diagnostics ------------------------------------------


@dataclass(frozen=True)
class GammaDiagnostics:
    """Monte Carlo values of the three difference-moment integrals."""

    gamma1: float
    gamma2: float
    gamma3: float
    se1: float
    se2: float
    se3: float
    eta: float
    details: dict = field(default_factory=dict)


def _feasible_eta_interval(gamma: float) -> tuple[float, float]:
    limit = max(2.0 * gamma, 1.0 - gamma)
    return 1.0, 1.0 / limit


def _diff1_moment_sample(args) -> np.ndarray:
    params, u, k0, power, seed = args
    config = sample_config(params, seed)
    counts = diff1_clique_upto(config, u, k0)
    return np.asarray(counts, dtype=np.float64) ** power


def _diff2_moment_sample(args) -> np.ndarray:
    params, u, y, v, k0, power, seed = args
    config = sample_config(params, seed)
    counts = diff2_clique_upto(config, u, MarkedPoint(y, v), k0)
    return np.asarray(counts, dtype=np.float64) ** power


def _node_jackknife(values: np.ndarray, fn, batches: int = 10) -> tuple[float, float]:
    """Estimate fn(mean over axis 0) with a batch jackknife SE."""
    r = values.shape[0]
    full = fn(values.mean(axis=0))
    b = min(batches, r)
    if b < 2:
        return full, float("nan")
    bounds = np.linspace(0, r, b + 1, dtype=int)
    est = []
    for i in range(b):
        keep = np.ones(r, dtype=bool)
        keep[bounds[i] : bounds[i + 1]] = False
        est.append(fn(values[keep].mean(axis=0)))
    est_arr = np.asarray(est)
    return full, float(np.sqrt((b - 1) / b * np.sum((est_arr - est_arr.mean()) ** 2)))


def gamma_diagnostics(
    params: ModelParams,
    eta: float,
    mc_budget: int,
    seed: int = 0,
    k0: int = 3,
    threads: int = 1,
) -> GammaDiagnostics:
    """Trend-level Monte Carlo estimates of the three normalized integrals.

    The integrals mix (2 eta)-th and (eta+1)-th moments of first and second
    difference counts; moments are estimated on stratified (u, y, v) grids
    and integrated by midpoint/trapezoid rules.  Useful for comparing growth
    across torus lengths, not for tight numerics.
    """
    lo, hi = _feasible_eta_interval(params.gamma)
    if not (1.0 < eta < 2.0) or eta * max(2.0 * params.gamma, 1.0 - params.gamma) >= 1.0:
        raise ParameterError(
            f"eta={eta} infeasible for gamma={params.gamma}; "
            f"feasible interval ({lo}, {min(2.0, hi)})"
        )
    n = params.torus_length
    g_u, g_v = 8, 6
    u_grid = (np.arange(g_u) + 0.5) / g_u
    v_grid = (np.arange(g_v) + 0.5) / g_v
    y_grid = [0.0, 0.5]
    while y_grid[-1] < 0.5 * n:
        y_grid.append(min(y_grid[-1] * 2.0, 0.5 * n))
    y_grid_arr = np.asarray(y_grid)

    nodes_12 = g_u * g_v * y_grid_arr.size
    r_node = max(16, mc_budget // (2 * nodes_12))
    g3_grid = (np.arange(12) + 0.5) / 12.0
    r3 = max(32, mc_budget // (2 * g3_grid.size))

    # First-difference moments for Gamma_3 (power eta+1) and the D_q factor of
    # Gamma_1 (power 2 eta); shared samples per grid mark.
    def diff1_moments(marks: np.ndarray, power: float, tag: int):
        per_mark = []
        for gi, u in enumerate(marks):
            tasks = [
                (params, float(u), k0, power, derive_seed(seed, tag, gi, i))
                for i in range(r3 if tag == 3 else r_node)
            ]
            vals = np.stack(parallel_map(_diff1_moment_sample, tasks, threads))
            per_mark.append(vals)
        return per_mark

    diff1_g3 = diff1_moments(g3_grid, eta + 1.0, 3)
    diff1_g1 = diff1_moments(v_grid, 2.0 * eta, 4)

    # Gamma_3: sum over k, l of the Hoelder-paired (eta+1) moments.
    a = 1.0 / (eta + 1.0)

    def g3_node(means: np.ndarray) -> float:
        pos = np.maximum(means, 0.0)
        return float(sum(pos[k] ** a * pos[l] ** (1.0 - a) for k in range(k0) for l in range(k0)))

    g3_vals, g3_ses = zip(*(_node_jackknife(v, g3_node) for v in diff1_g3))
    gamma3 = float(np.mean(g3_vals))
    se3 = float(np.sqrt(np.nansum(np.asarray(g3_ses) ** 2)) / g3_grid.size)

    # Second-difference moments on the (u, y, v) grid.
    b = 1.0 / (2.0 * eta)
    j_mean = np.zeros((g_u, y_grid_arr.size, g_v, k0))
    j_se = np.zeros_like(j_mean)
    for gi, u in enumerate(u_grid):
        for yi, y in enumerate(y_grid_arr):
            for vi, v in enumerate(v_grid):
                tasks = [
                    (params, float(u), float(y), float(v), k0, 2.0 * eta,
                     derive_seed(seed, 5, gi, yi, vi, i))
                    for i in range(r_node)
                ]
                vals = np.stack(parallel_map(_diff2_moment_sample, tasks, threads))
                j_mean[gi, yi, vi] = vals.mean(axis=0)
                j_se[gi, yi, vi] = vals.std(ddof=1, axis=0) / math.sqrt(vals.shape[0])

    k_mean = np.stack([v.mean(axis=0) for v in diff1_g1])  # (g_v, k0)

    def inner_integrals(weight_of_k) -> tuple[np.ndarray, np.ndarray]:
        """Integrate over q = (y, v) for each u; returns value and SE per u."""
        vals = np.zeros(g_u)
        ses = np.zeros(g_u)
        for gi in range(g_u):
            total = 0.0
            var = 0.0
            for k in range(k0):
                for l in range(k0):
                    f = weight_of_k[:, k][None, :] * np.maximum(j_mean[gi, :, :, l], 0.0) ** b
                    per_y = f.mean(axis=1)  # midpoint rule over v
                    total += 2.0 * float(np.trapezoid(per_y, y_grid_arr))
                    df = (
                        b
                        * np.maximum(j_mean[gi, :, :, l], 1e-300) ** (b - 1.0)
                        * j_se[gi, :, :, l]
                        * weight_of_k[:, k][None, :]
                    )
                    per_y_se = df.mean(axis=1)
                    var += (2.0 * float(np.trapezoid(per_y_se, y_grid_arr))) ** 2
            vals[gi] = total
            ses[gi] = math.sqrt(var)
        return vals, ses

    k_weight = np.maximum(k_mean, 0.0) ** b  # E[(D_q C_k)^{2 eta}]^{1/(2 eta)}
    inner1, inner1_se = inner_integrals(k_weight)

    def inner2() -> tuple[np.ndarray, np.ndarray]:
        vals = np.zeros(g_u)
        ses = np.zeros(g_u)
        for gi in range(g_u):
            total = 0.0
            var = 0.0
            for k in range(k0):
                for l in range(k0):
                    f = (
                        np.maximum(j_mean[gi, :, :, k], 0.0) ** b
                        * np.maximum(j_mean[gi, :, :, l], 0.0) ** b
                    )
                    per_y = f.mean(axis=1)
                    total += 2.0 * float(np.trapezoid(per_y, y_grid_arr))
                    df = (
                        2.0
                        * b
                        * np.maximum(j_mean[gi, :, :, k], 1e-300) ** (b - 1.0)
                        * j_se[gi, :, :, k]
                    )
                    per_y_se = df.mean(axis=1)
                    var += (2.0 * float(np.trapezoid(per_y_se, y_grid_arr))) ** 2
            vals[gi] = total
            ses[gi] = math.sqrt(var)
        return vals, ses

    inner2_vals, inner2_se = inner2()

    def outer(vals: np.ndarray, ses: np.ndarray) -> tuple[float, float]:
        powered = vals**eta
        est = float(powered.mean())
        dse = eta * np.maximum(vals, 1e-300) ** (eta - 1.0) * ses
        return est, float(np.sqrt(np.sum(dse**2)) / vals.size)

    gamma1, se1 = outer(inner1, inner1_se)
    gamma2, se2 = outer(inner2_vals, inner2_se)

    return GammaDiagnostics(
        gamma1=gamma1,
        gamma2=gamma2,
        gamma3=gamma3,
        se1=se1,
        se2=se2,
        se3=se3,
        eta=eta,
        details={
            "k0": k0,
            "torus_length": n,
            "u_grid": u_grid.tolist(),
            "v_grid": v_grid.tolist(),
            "y_grid": y_grid_arr.tolist(),
            "samples_per_node": r_node,
            "samples_per_mark": r3,
        },
    )
