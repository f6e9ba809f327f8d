"""Residual checks: every transformation law becomes a named, gridded check.

Each check evaluates one identity over the full parameter matrix of a
:class:`SuiteConfig` (models x alphas x rescaling potentials x densities x
couplings x grid points) and reports the worst absolute and relative
residual.  Relative residuals are normalized by max(1, |lhs|, |rhs|) so
near-zero references cannot inflate them.

Three deliberately wrong configurations run as first-class suite members:
dropping the Ricci coupling, normalizing the skewness shift by 1/3, and
giving the trace operator a conformal output weight.  Each must fail by at
least a factor of 1000 over tolerance; a suite in which they pass is
reporting vacuously and is itself considered broken.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .cup_transform import (
    WeightedDensity,
    connection_shift_prediction,
    curvature_shift_prediction,
    make_rescaling,
    rescaled_model,
    ricci_shift_prediction,
    transform_coupling,
    transform_density,
)
from .errors import ConfigError
from .geometry import (
    HessianSpec,
    NonlinearCoupling,
    alpha_connection,
    covariant_derivative_metric,
    cup_laplacian,
    cup_laplacian_decomposed,
    modified_hessian,
    nonlinear_cup_operator,
    ricci,
    riemann,
)
from .manifolds import gaussian_model, multinomial_model
from .tensor_core import as_point

MODE_TOLERANCE = {"jet": 1e-7, "fd": 1e-4}
TRACE_TOLERANCE = 1e-9
DECOMPOSITION_TOLERANCE = 1e-8
CONTROL_FACTOR = 1e3

CHECK_IDS = (
    "metric_compat",
    "codazzi",
    "conn_shift",
    "curv_shift",
    "ricci_shift",
    "hessian_inv",
    "laplacian_inv",
    "nonlinear_inv",
    "integrability",
)


@dataclass(frozen=True)
class CheckReport:
    check_id: str
    points_evaluated: int
    max_abs_residual: float
    max_rel_residual: float
    tolerance: float
    passed: bool
    worst_point: tuple
    negative_control: bool = False
    flat_points: int = 0
    trace_residual: float = None
    decomp_residual: float = None


@dataclass(frozen=True)
class ModelCase:
    """One model with its grid and the chart-specific test inputs."""

    model: object
    points: tuple
    potentials: tuple
    densities: tuple
    couplings: tuple


@dataclass(frozen=True)
class SuiteConfig:
    """The full evaluation matrix plus the injectable wrong-parameter knobs.

    ``hessian_k=None`` means the canonical 1/(n-1); ``sym_weight`` scales
    the skewness shift (1 is the defining law); ``laplacian_s`` is the
    output weight asserted for the trace operator (0 is the claim).
    """

    cases: tuple
    alphas: tuple
    tolerance: float = None
    tol_overrides: dict = field(default_factory=dict)
    hessian_k: float = None
    sym_weight: float = 1.0
    laplacian_s: float = 0.0
    seed: int = 0

    def validate(self):
        if not self.cases:
            raise ConfigError("suite config has no model cases")
        if not self.alphas:
            raise ConfigError("suite config has an empty alpha list")
        for case in self.cases:
            if not case.points:
                raise ConfigError(f"model case {case.model.name!r} has no grid points")
            if not case.potentials:
                raise ConfigError(f"model case {case.model.name!r} has no rescaling potentials")
            if not case.densities:
                raise ConfigError(f"model case {case.model.name!r} has no densities")
            for p in case.points:
                case.model.require_inside(p)


class _Residuals:
    def __init__(self):
        self.count = 0
        self.max_abs = 0.0
        self.max_rel = 0.0
        self.worst = None

    def add(self, point, lhs, rhs):
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        diff = float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0
        scale = max(1.0, float(np.max(np.abs(lhs))) if lhs.size else 0.0,
                    float(np.max(np.abs(rhs))) if rhs.size else 0.0)
        rel = diff / scale
        self.count += 1
        self.max_abs = max(self.max_abs, diff)
        if rel >= self.max_rel:
            self.max_rel = rel
            self.worst = as_point(point).coords
        return rel

    def report(self, check_id, tolerance, passed=None, **extra):
        if passed is None:
            passed = self.max_rel <= tolerance
        return CheckReport(
            check_id=check_id,
            points_evaluated=self.count,
            max_abs_residual=self.max_abs,
            max_rel_residual=self.max_rel,
            tolerance=tolerance,
            passed=passed,
            worst_point=self.worst if self.worst is not None else (),
            **extra,
        )


def _tolerance_for(config, check_id):
    if check_id in config.tol_overrides:
        return float(config.tol_overrides[check_id])
    if config.tolerance is not None:
        return float(config.tolerance)
    return max(MODE_TOLERANCE[case.model.mode] for case in config.cases)


def _rescalings(config, case, alpha):
    for potential in case.potentials:
        resc = make_rescaling(alpha, potential)
        yield resc, rescaled_model(case.model, resc, sym_weight=config.sym_weight)


# -- structural checks on models --------------------------------------------


def _model_variants(config, case, alpha):
    yield case.model
    for _, varied in _rescalings(config, case, alpha):
        yield varied


def _check_metric_compat(config, tol):
    res = _Residuals()
    for case in config.cases:
        for alpha in config.alphas:
            for model in _model_variants(config, case, alpha):
                for p in case.points:
                    nabla_g = covariant_derivative_metric(model, alpha, p).components
                    res.add(p, nabla_g, alpha * model.skewness_at(p).components)
    return res.report("metric_compat", tol)


def _check_codazzi(config, tol):
    res = _Residuals()
    for case in config.cases:
        for alpha in config.alphas:
            for model in _model_variants(config, case, alpha):
                for p in case.points:
                    nabla_g = covariant_derivative_metric(model, alpha, p).components
                    res.add(p, nabla_g, np.transpose(nabla_g, (1, 0, 2)))
    return res.report("codazzi", tol)


# -- shift predictions vs direct recomputation ------------------------------


def _check_conn_shift(config, tol):
    res = _Residuals()
    for case in config.cases:
        for alpha in config.alphas:
            for resc, varied in _rescalings(config, case, alpha):
                for p in case.points:
                    pred = connection_shift_prediction(resc, p).components
                    direct = (alpha_connection(varied, alpha, p).components
                              - alpha_connection(case.model, alpha, p).components)
                    res.add(p, pred, direct)
    return res.report("conn_shift", tol)


def _check_curv_shift(config, tol):
    res = _Residuals()
    trace = _Residuals()
    for case in config.cases:
        for alpha in config.alphas:
            for resc, varied in _rescalings(config, case, alpha):
                for p in case.points:
                    pred = curvature_shift_prediction(case.model, resc, p).components
                    direct = (riemann(varied, alpha, p).components
                              - riemann(case.model, alpha, p).components)
                    res.add(p, pred, direct)
                    trace.add(p, np.einsum("kjkl->jl", pred),
                              ricci_shift_prediction(case.model, resc, p).components)
    passed = res.max_rel <= tol and trace.max_rel <= TRACE_TOLERANCE
    return res.report("curv_shift", tol, passed=passed, trace_residual=trace.max_rel)


def _check_ricci_shift(config, tol):
    res = _Residuals()
    for case in config.cases:
        for alpha in config.alphas:
            for resc, varied in _rescalings(config, case, alpha):
                for p in case.points:
                    pred = ricci_shift_prediction(case.model, resc, p).components
                    direct = (ricci(varied, alpha, p).components
                              - ricci(case.model, alpha, p).components)
                    res.add(p, pred, direct)
    return res.report("ricci_shift", tol)


# -- operator invariances ---------------------------------------------------


def _check_hessian_inv(config, tol):
    res = _Residuals()
    for case in config.cases:
        n = case.model.dim
        k = config.hessian_k if config.hessian_k is not None else 1.0 / (n - 1)
        spec = HessianSpec(k)
        for alpha in config.alphas:
            for resc, varied in _rescalings(config, case, alpha):
                for density in case.densities:
                    scaled = transform_density(density, resc)
                    for p in case.points:
                        lhs = modified_hessian(varied, alpha, spec, scaled.f, p).components
                        rhs = resc.eta(p) * modified_hessian(
                            case.model, alpha, spec, density.f, p).components
                        res.add(p, lhs, rhs)
    return res.report("hessian_inv", tol)


def _check_laplacian_inv(config, tol):
    res = _Residuals()
    decomp = _Residuals()
    s = config.laplacian_s
    for case in config.cases:
        for alpha in config.alphas:
            for resc, varied in _rescalings(config, case, alpha):
                for density in case.densities:
                    scaled = transform_density(density, resc)
                    for p in case.points:
                        lhs = cup_laplacian(varied, alpha, scaled.f, p)
                        base = cup_laplacian(case.model, alpha, density.f, p)
                        res.add(p, lhs, resc.eta(p) ** s * base if s != 0.0 else base)
                        decomp.add(p, lhs,
                                   cup_laplacian_decomposed(varied, alpha, scaled.f, p))
                        decomp.add(p, base,
                                   cup_laplacian_decomposed(case.model, alpha, density.f, p))
    passed = res.max_rel <= tol and decomp.max_rel <= DECOMPOSITION_TOLERANCE
    return res.report("laplacian_inv", tol, passed=passed, decomp_residual=decomp.max_rel)


def _check_nonlinear_inv(config, tol):
    res = _Residuals()
    for case in config.cases:
        for alpha in config.alphas:
            for resc, varied in _rescalings(config, case, alpha):
                for density in case.densities:
                    scaled = transform_density(density, resc)
                    for coupling in case.couplings:
                        scaled_coupling = transform_coupling(coupling, resc)
                        for p in case.points:
                            lhs = nonlinear_cup_operator(
                                varied, alpha, scaled.f, scaled_coupling, p)
                            rhs = nonlinear_cup_operator(
                                case.model, alpha, density.f, coupling, p)
                            res.add(p, lhs, rhs)
    return res.report("nonlinear_inv", tol)


def _check_integrability(config, tol):
    res = _Residuals()
    flat = 0
    k = config.hessian_k
    for case in config.cases:
        for alpha in config.alphas:
            for p in case.points:
                riem = riemann(case.model, alpha, p).components
                if float(np.max(np.abs(riem))) <= tol:
                    flat += 1
                    continue
                ric = np.einsum("kjkl->jl", riem)
                kk = k if k is not None else 1.0 / (case.model.dim - 1)
                eye = np.eye(case.model.dim)
                predicted = kk * (np.einsum("ik,jl->ijkl", eye, ric)
                                  - np.einsum("il,jk->ijkl", eye, ric))
                res.add(p, riem, predicted)
    return res.report("integrability", tol, flat_points=flat)


_CHECK_FUNCTIONS = {
    "metric_compat": _check_metric_compat,
    "codazzi": _check_codazzi,
    "conn_shift": _check_conn_shift,
    "curv_shift": _check_curv_shift,
    "ricci_shift": _check_ricci_shift,
    "hessian_inv": _check_hessian_inv,
    "laplacian_inv": _check_laplacian_inv,
    "nonlinear_inv": _check_nonlinear_inv,
    "integrability": _check_integrability,
}


def check_type_invariance(operator, op_type, model, resc, density, points):
    """Generic (r; s) residual: operator of eta^r f on the rescaled model
    against eta^s times the operator of f on the original.

    ``operator(model, f, p)`` may return a scalar or tensor components.
    """
    varied = rescaled_model(model, resc)
    scaled = transform_density(WeightedDensity(density.f, op_type.r), resc)
    res = _Residuals()
    for p in points:
        lhs = operator(varied, scaled.f, p)
        rhs = operator(model, density.f, p)
        lhs = lhs.components if hasattr(lhs, "components") else lhs
        rhs = rhs.components if hasattr(rhs, "components") else rhs
        res.add(p, lhs, resc.eta(p) ** op_type.s * np.asarray(rhs, dtype=float))
    tol = MODE_TOLERANCE[model.mode]
    return res.report("type_invariance", tol)


def run_check(check_id, config):
    """One named check over the full matrix of ``config``."""
    if check_id not in _CHECK_FUNCTIONS:
        raise ConfigError(f"unknown check id {check_id!r}; known: {', '.join(CHECK_IDS)}")
    config.validate()
    return _CHECK_FUNCTIONS[check_id](config, _tolerance_for(config, check_id))


@dataclass(frozen=True)
class SuiteResult:
    reports: tuple
    passed: bool

    def summary(self, seed=None):
        checks = []
        for r in self.reports:
            checks.append({
                "check_id": r.check_id,
                "negative_control": r.negative_control,
                "points_evaluated": r.points_evaluated,
                "flat_points": r.flat_points,
                "max_abs_residual": r.max_abs_residual,
                "max_rel_residual": r.max_rel_residual,
                "tolerance": r.tolerance,
                "trace_residual": r.trace_residual,
                "decomp_residual": r.decomp_residual,
                "passed": r.passed,
                "worst_point": list(r.worst_point),
            })
        out = {"passed": self.passed, "checks": checks}
        if seed is not None:
            out["seed"] = seed
        return out


_NEGATIVE_CONTROLS = (
    ("hessian_inv[k=0]", "hessian_inv", {"hessian_k": 0.0}),
    ("conn_shift[sym=1/3]", "conn_shift", {"sym_weight": 1.0 / 3.0}),
    ("laplacian_inv[s=1]", "laplacian_inv", {"laplacian_s": 1.0}),
)


def control_failed_as_expected(report):
    """A negative control behaves iff its residual is >= 1000x tolerance."""
    return report.max_rel_residual >= CONTROL_FACTOR * report.tolerance


def run_suite(config):
    """All checks plus the three negative controls, aggregated.

    Overall pass requires every regular check to pass and every negative
    control to fail by the factor-1000 margin; per-check errors surface as
    ConfigError/geometry exceptions rather than being swallowed.
    """
    config.validate()
    reports = [run_check(check_id, config) for check_id in CHECK_IDS]
    for label, base_id, overrides in _NEGATIVE_CONTROLS:
        varied = dataclasses.replace(config, **overrides)
        report = run_check(base_id, varied)
        reports.append(dataclasses.replace(report, check_id=label, negative_control=True))
    passed = all(r.passed for r in reports if not r.negative_control) and all(
        control_failed_as_expected(r) for r in reports if r.negative_control
    )
    return SuiteResult(reports=tuple(reports), passed=passed)


# -- default matrix ---------------------------------------------------------

DEFAULT_ALPHAS = (-1.0, -0.5, 0.0, 0.5, 1.0)


def default_suite_config(seed=0, tolerance=None):
    """Gaussian and 3-category models on small interior grids, five alphas,
    two rescaling potentials, two densities, and four coupling exponents."""
    gauss = gaussian_model()
    gauss_case = ModelCase(
        model=gauss,
        points=tuple((mu, sigma) for mu in (-1.0, 0.0, 1.0) for sigma in (0.6, 1.0, 1.8)),
        potentials=(gauss.scalar_field("0.3*mu"), gauss.scalar_field("0.1*mu*sigma")),
        densities=(
            WeightedDensity(gauss.scalar_field("1"), 1.0),
            WeightedDensity(gauss.scalar_field("1 + 0.1*mu*sigma"), 1.0),
        ),
        couplings=(
            NonlinearCoupling(gauss.scalar_field("2"), 3.0),
            NonlinearCoupling(gauss.scalar_field("1 + 0.1*mu"), -2.0),
            NonlinearCoupling(gauss.scalar_field("2"), 0.5),
            NonlinearCoupling(gauss.scalar_field("1 + 0.1*mu"), 1.0),
        ),
    )
    multi = multinomial_model(3)
    multi_case = ModelCase(
        model=multi,
        points=((1 / 3, 1 / 3), (0.2, 0.3), (0.3, 0.2), (0.25, 0.4), (0.4, 0.25)),
        potentials=(multi.scalar_field("0.3*p1"), multi.scalar_field("0.2*p1*p2")),
        densities=(
            WeightedDensity(multi.scalar_field("1"), 1.0),
            WeightedDensity(multi.scalar_field("1 + 0.1*p1*p2"), 1.0),
        ),
        couplings=(
            NonlinearCoupling(multi.scalar_field("2"), 3.0),
            NonlinearCoupling(multi.scalar_field("1 + 0.1*p1"), -2.0),
            NonlinearCoupling(multi.scalar_field("2"), 0.5),
            NonlinearCoupling(multi.scalar_field("1 + 0.1*p1"), 1.0),
        ),
    )
    return SuiteConfig(
        cases=(gauss_case, multi_case),
        alphas=DEFAULT_ALPHAS,
        tolerance=tolerance,
        tol_overrides={} if tolerance is not None else {
            "curv_shift": 1e-6,
            "ricci_shift": 1e-6,
            "integrability": 1e-6,
        },
        seed=seed,
    )
