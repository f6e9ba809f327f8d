"""Connections, curvature, and the scalar operators built from them.

Index conventions, fixed once: Christoffel components are stored as
Gamma[k, i, j] = Gamma^k_ij (upper slot first); metric jets carry their
derivative axes trailing, dg[i, j, k] = d_k g_ij; the curvature tensor is
R[i, j, k, l] = R^i_jkl with

    R^i_jkl = d_k Gamma^i_lj - d_l Gamma^i_kj
              + Gamma^i_km Gamma^m_lj - Gamma^i_lm Gamma^m_kj

and the Ricci tensor contracts the first against the third slot,
Ric_jl = R^k_jkl.  Derivatives of Gamma are assembled by the product rule
from metric and skewness jets, so the same code path serves exact-jet and
finite-difference models.

All functions are pure and pointwise.  A :class:`PointGeometry` instance
caches the intermediate arrays for one (model, alpha, point) triple; it is
never shared across evaluations.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, DimensionMismatchError, DomainError
from .tensor_core import (
    CONTRA,
    COV,
    ConstantField,
    ScalarField,
    Tensor,
    as_point,
    evaluate_jet,
    invert_metric,
)


@dataclass(frozen=True)
class Christoffel:
    """Connection coefficients Gamma^k_ij, stored as components[k, i, j]."""

    dim: int
    alpha: float
    components: np.ndarray

    def tensor(self):
        return Tensor(self.dim, (CONTRA, COV, COV), self.components)


@dataclass(frozen=True)
class CurvaturePack:
    riemann: Tensor
    ricci: Tensor
    scalar: float


@dataclass(frozen=True)
class HessianSpec:
    """Coupling of the Ricci term added to the second covariant derivative."""

    k: float


@dataclass(frozen=True)
class NonlinearCoupling:
    """Zeroth-order coupling lam * f^a; the exponent must be nonzero."""

    lam: ScalarField
    a: float

    def __post_init__(self):
        if self.a == 0:
            raise ConfigError("nonlinearity exponent a must be nonzero")


class PointGeometry:
    """Lazily computed geometric data of one model at one point.

    Construction validates the point against the model domain; every array
    is computed at most once per instance.
    """

    def __init__(self, model, alpha, p):
        self.model = model
        self.alpha = float(alpha)
        self.p = model.require_inside(as_point(p))
        self.dim = model.dim

    @cached_property
    def _gjet(self):
        return self.model.metric_jet(self.p, 2)

    @cached_property
    def _tjet(self):
        return self.model.skewness_jet(self.p, 1)

    @property
    def g(self):
        return self._gjet.value

    @property
    def dg(self):
        return self._gjet.d1

    @property
    def d2g(self):
        return self._gjet.d2

    @property
    def t(self):
        return self._tjet.value

    @property
    def dt(self):
        return self._tjet.d1

    @cached_property
    def ginv(self):
        return invert_metric(self.g)

    @cached_property
    def dginv(self):
        # d_l g^{ab} = -g^{am} (d_l g_{mq}) g^{qb}
        return -np.einsum("am,mql,qb->abl", self.ginv, self.dg, self.ginv)

    @cached_property
    def _lowered(self):
        # A[m, i, j] = (1/2)(d_i g_{jm} + d_j g_{im} - d_m g_{ij})
        dg = self.dg
        return 0.5 * (
            np.einsum("jmi->mij", dg) + np.einsum("imj->mij", dg) - np.einsum("ijm->mij", dg)
        )

    @cached_property
    def gamma0(self):
        return np.einsum("km,mij->kij", self.ginv, self._lowered)

    @cached_property
    def skew_mixed(self):
        # (t . g^{-1})^k_{ij} = t_{ijm} g^{mk}
        return np.einsum("ijm,mk->kij", self.t, self.ginv)

    @cached_property
    def gamma(self):
        if self.alpha == 0.0:
            return self.gamma0
        return self.gamma0 - 0.5 * self.alpha * self.skew_mixed

    @cached_property
    def dgamma(self):
        # d_l of gamma, by the product rule on g^{-1}, the lowered symbol,
        # and the skewness correction
        dA = 0.5 * (
            np.einsum("jmil->mijl", self.d2g)
            + np.einsum("imjl->mijl", self.d2g)
            - np.einsum("ijml->mijl", self.d2g)
        )
        out = np.einsum("kml,mij->kijl", self.dginv, self._lowered)
        out += np.einsum("km,mijl->kijl", self.ginv, dA)
        if self.alpha != 0.0:
            dskew = np.einsum("ijml,mk->kijl", self.dt, self.ginv)
            dskew += np.einsum("ijm,mkl->kijl", self.t, self.dginv)
            out -= 0.5 * self.alpha * dskew
        return out

    @cached_property
    def riemann(self):
        dG = self.dgamma
        curl = np.transpose(dG, (0, 2, 3, 1)) - np.transpose(dG, (0, 2, 1, 3))
        quad = np.einsum("ikm,mlj->ijkl", self.gamma, self.gamma)
        quad = quad - np.transpose(quad, (0, 1, 3, 2))
        return curl + quad

    @cached_property
    def ricci(self):
        return np.einsum("kjkl->jl", self.riemann)

    @cached_property
    def scalar(self):
        return float(np.einsum("jl,jl->", self.ginv, self.ricci))


# -- connections ------------------------------------------------------------


def levi_civita(model, p):
    """Metric-compatible torsion-free connection from the metric jets."""
    ws = PointGeometry(model, 0.0, p)
    return Christoffel(model.dim, 0.0, ws.gamma0)


def alpha_connection(model, alpha, p):
    """The skewness-shifted connection: Gamma^0 - (alpha/2) t . g^{-1}."""
    ws = PointGeometry(model, alpha, p)
    return Christoffel(model.dim, float(alpha), ws.gamma)


def covariant_derivative_metric(model, alpha, p):
    """(nabla g)_{kij} = d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il.

    Slot 0 is the differentiation direction.  Equals alpha times the
    skewness tensor for every model that honors the metric/skewness pairing.
    """
    ws = PointGeometry(model, alpha, p)
    comps = np.einsum("ijk->kij", ws.dg)
    comps = comps - np.einsum("lki,lj->kij", ws.gamma, ws.g)
    comps = comps - np.einsum("lkj,il->kij", ws.gamma, ws.g)
    return Tensor(model.dim, (COV, COV, COV), comps)


# -- curvature --------------------------------------------------------------


def riemann(model, alpha, p):
    ws = PointGeometry(model, alpha, p)
    return Tensor(model.dim, (CONTRA, COV, COV, COV), ws.riemann)


def ricci(model, alpha, p):
    ws = PointGeometry(model, alpha, p)
    return Tensor(model.dim, (COV, COV), ws.ricci)


def scalar_curvature(model, alpha, p):
    return PointGeometry(model, alpha, p).scalar


def curvature(model, alpha, p):
    """Riemann, Ricci, and scalar curvature in one evaluation."""
    ws = PointGeometry(model, alpha, p)
    return CurvaturePack(
        riemann=Tensor(model.dim, (CONTRA, COV, COV, COV), ws.riemann),
        ricci=Tensor(model.dim, (COV, COV), ws.ricci),
        scalar=ws.scalar,
    )


# -- scalar operators -------------------------------------------------------


def _as_field(f, model):
    if isinstance(f, ScalarField):
        return f
    if isinstance(f, (int, float)):
        return ConstantField(f, model.dim)
    raise ConfigError(f"density must be a scalar field or a number, got {type(f).__name__}")


def _field_jet(f, model, p, order):
    field = _as_field(f, model)
    jet = evaluate_jet(field, p, order)
    if jet.dim != model.dim:
        raise DimensionMismatchError(
            f"density is a field of {jet.dim} coordinates, model has {model.dim}"
        )
    return jet


def alpha_hessian(model, alpha, f, p):
    """Second covariant derivative of f: d_i d_j f - Gamma^k_ij d_k f."""
    fj = _field_jet(f, model, p, 2)
    ws = PointGeometry(model, alpha, p)
    comps = fj.d2 - np.einsum("kij,k->ij", ws.gamma, fj.d1)
    return Tensor(model.dim, (COV, COV), comps)


def _ricci_coupling(dim):
    if dim < 2:
        raise DimensionMismatchError(
            "the Ricci coupling 1/(n-1) is undefined on a 1-dimensional model"
        )
    return 1.0 / (dim - 1)


def modified_hessian(model, alpha, spec, f, p):
    """The Hessian with its curvature correction: (nabla d)f + k Ric f.

    The Ricci term multiplies the evaluated density: this operator action is
    the one whose rescaling behavior is exactly conformal of weight one.
    """
    k = spec.k if isinstance(spec, HessianSpec) else float(spec)
    fj = _field_jet(f, model, p, 2)
    ws = PointGeometry(model, alpha, p)
    comps = fj.d2 - np.einsum("kij,k->ij", ws.gamma, fj.d1)
    if k != 0.0:
        comps = comps + k * ws.ricci * fj.value
    return Tensor(model.dim, (COV, COV), comps)


def cup_laplacian(model, alpha, f, p):
    """Metric trace of the curvature-corrected Hessian at k = 1/(n-1)."""
    k = _ricci_coupling(model.dim)
    fj = _field_jet(f, model, p, 2)
    ws = PointGeometry(model, alpha, p)
    hess = fj.d2 - np.einsum("kij,k->ij", ws.gamma, fj.d1)
    return float(np.einsum("ij,ij->", ws.ginv, hess) + k * ws.scalar * fj.value)


def alpha_laplacian(model, alpha, f, p):
    """Divergence-form Laplacian: d_i(g^{ij} d_j f) + Gamma^i_im g^{mj} d_j f."""
    fj = _field_jet(f, model, p, 2)
    ws = PointGeometry(model, alpha, p)
    out = np.einsum("ij,ij->", ws.ginv, fj.d2)
    out += np.einsum("iji,j->", ws.dginv, fj.d1)
    out += np.einsum("iim,mj,j->", ws.gamma, ws.ginv, fj.d1)
    return float(out)


def cup_laplacian_decomposed(model, alpha, f, p):
    """The trace operator reassembled from its three advertised pieces.

    Divergence-form Laplacian, plus alpha times the skewness drift
    t_{abm} g^{ab} g^{mk} d_k f, plus the scalar-curvature term.  Agreement
    with :func:`cup_laplacian` is a structural consistency check: the two
    routes share no intermediate beyond the metric jets.
    """
    k = _ricci_coupling(model.dim)
    fj = _field_jet(f, model, p, 2)
    ws = PointGeometry(model, alpha, p)
    out = alpha_laplacian(model, alpha, f, p)
    out += alpha * np.einsum("abm,ab,mk,k->", ws.t, ws.ginv, ws.ginv, fj.d1)
    out += k * ws.scalar * fj.value
    return float(out)


def nonlinear_cup_operator(model, alpha, f, coupling, p):
    """cup_laplacian(f) plus the zeroth-order term lam(p) * f(p)^a."""
    point = as_point(p)
    base = cup_laplacian(model, alpha, f, point)
    fval = float(_field_jet(f, model, point, 0).value)
    lam = float(_field_jet(coupling.lam, model, point, 0).value)
    a = coupling.a
    if fval < 0.0 and not float(a).is_integer():
        raise DomainError(
            f"density value {fval} is negative; exponent {a} needs a positive base"
        )
    if fval == 0.0 and a < 0.0:
        raise DomainError(f"density vanishes at {point.coords}; exponent {a} is negative")
    return base + lam * fval ** a


def integrability_residual(model, alpha, k, p):
    """Max-norm gap between the curvature and its Ricci reconstruction.

    Measures |R^i_jkl - k (delta^i_k Ric_jl - delta^i_l Ric_jk)| over all
    indices; ``k=None`` selects the canonical coupling 1/(n-1).
    """
    if k is None:
        k = _ricci_coupling(model.dim)
    elif model.dim < 2:
        raise DimensionMismatchError("integrability check needs dimension >= 2")
    ws = PointGeometry(model, alpha, p)
    eye = np.eye(model.dim)
    predicted = k * (
        np.einsum("ik,jl->ijkl", eye, ws.ricci) - np.einsum("il,jk->ijkl", eye, ws.ricci)
    )
    return float(np.max(np.abs(ws.riemann - predicted)))
