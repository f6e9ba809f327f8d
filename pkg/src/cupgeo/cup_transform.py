"""Conformal-projective rescalings of a model and their predicted effects.

A rescaling is generated by a scalar potential: the conformal factor is
eta = exp(-alpha * potential) and the covector field psi is the potential's
exact differential.  Parameterizing by the potential (rather than by eta
directly) makes the defining constraint d(log eta) = -alpha * psi and the
exactness of psi hold by construction, which removes every invalid-input
case except a chart mismatch.

Applying a rescaling scales the metric by eta and shifts the skewness by
the symmetrized metric/psi product before the same scaling.  At alpha = 0
the factor degenerates to eta = 1 while psi still deforms the skewness;
all shift predictions carry an alpha prefactor, so they vanish there
consistently.

The three closed-form shift predictions (connection, curvature, Ricci) are
the module's substance: each one is checked elsewhere against direct
recomputation on the rescaled model.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import jets
from .errors import ConfigError, UnsupportedOrderError
from .manifolds import ManifoldModel, _mirror_assign
from .tensor_core import CONTRA, COV, ScalarField, Tensor, as_point
from .geometry import NonlinearCoupling, PointGeometry


@dataclass(frozen=True)
class WeightedDensity:
    """A scalar field tagged with its rescaling weight r."""

    f: ScalarField
    r: float


@dataclass(frozen=True)
class OperatorType:
    """Invariance signature (r; s): weight-r input, weight-s output."""

    r: float
    s: float


def _component(jet, index):
    """Scalar jet of one component of an array-valued jet."""
    parts = [jet.deriv(k)[index] for k in range(1, jet.order + 1)]
    return jets.Jet(jet.dim, jet.order, jet.value[index], *parts)


class CupRescaling:
    """alpha, the generating potential, and the derived eta and psi."""

    def __init__(self, alpha, potential):
        if not isinstance(potential, ScalarField):
            raise ConfigError(
                f"rescaling potential must be a scalar field, got {type(potential).__name__}"
            )
        self.alpha = float(alpha)
        if not np.isfinite(self.alpha):
            raise ConfigError(f"alpha must be finite, got {alpha}")
        self.potential = potential
        self.dim = potential.dim

    def eta_jet(self, coords, order):
        phi = self.potential.jet(coords, order)
        return jets.exp((-self.alpha) * phi)

    def eta(self, p):
        return float(self.eta_jet(as_point(p).coords, 0).value)

    def psi_jet(self, coords, order):
        """Array jet of psi = d(potential); order m consumes potential order m+1."""
        if order + 1 > jets.MAX_ORDER:
            raise UnsupportedOrderError(
                f"psi jets available to order {jets.MAX_ORDER - 1}, requested {order}"
            )
        phi = self.potential.jet(coords, order + 1)
        parts = [phi.deriv(k) for k in range(2, order + 2)]
        return jets.Jet(phi.dim, order, phi.d1, *parts)

    def psi(self, p):
        return Tensor(self.dim, (COV,), self.psi_jet(as_point(p).coords, 0).value)


def make_rescaling(alpha, potential):
    return CupRescaling(alpha, potential)


def parse_rescaling(config_text, model):
    """Rescaling from JSON: {"alpha": number, "potential": expression}."""
    try:
        data = json.loads(config_text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"rescaling config is not valid JSON: {e}") from None
    if not isinstance(data, dict) or "alpha" not in data or "potential" not in data:
        raise ConfigError('rescaling config needs "alpha" and "potential" fields')
    try:
        alpha = float(data["alpha"])
    except (TypeError, ValueError):
        raise ConfigError(f"alpha must be a number, got {data['alpha']!r}") from None
    if not isinstance(data["potential"], str):
        raise ConfigError("potential must be an expression string")
    return CupRescaling(alpha, model.scalar_field(data["potential"]))


# -- transformed fields -----------------------------------------------------


class _ScaledMetricField:
    mode = "jet"

    def __init__(self, base, resc):
        self.base = base
        self.resc = resc
        self.dim = base.dim
        self.rank = 2

    def jet(self, coords, order):
        return self.resc.eta_jet(coords, order) * self.base.jet(coords, order)


class _ShiftedSkewnessField:
    """eta * (t + weight * sym(g (x) psi)), assembled at the jet level.

    ``weight`` exists only to let the verification suite run its
    wrong-normalization negative control; the defining transformation has
    weight 1.
    """

    mode = "jet"

    def __init__(self, model, resc, weight):
        self.model = model
        self.resc = resc
        self.weight = weight
        self.dim = model.dim
        self.rank = 3

    def jet(self, coords, order):
        n = self.dim
        gj = self.model.metric.jet(coords, order)
        tj = self.model.skewness.jet(coords, order)
        psi = self.resc.psi_jet(coords, order)
        sym = jets.Jet.constant(np.zeros((n, n, n)), n, order)
        for i in range(n):
            for j in range(i, n):
                for k in range(j, n):
                    s = (
                        _component(gj, (i, j)) * _component(psi, (k,))
                        + _component(gj, (j, k)) * _component(psi, (i,))
                        + _component(gj, (k, i)) * _component(psi, (j,))
                    )
                    if self.weight != 1.0:
                        s = self.weight * s
                    _mirror_assign(sym, (i, j, k), s, order)
        return self.resc.eta_jet(coords, order) * (tj + sym)


class _PoweredScaleField(ScalarField):
    """eta^power * base, the transformation rule shared by densities
    (power = r) and couplings (power = -a)."""

    def __init__(self, base, resc, power):
        self.base = base
        self.resc = resc
        self.power = float(power)
        self.dim = base.dim
        self.domain = base.domain
        self.mode = base.mode

    def jet(self, coords, order):
        factor = self.resc.eta_jet(coords, order) ** self.power
        return factor * self.base.jet(coords, order)


def _check_chart(model, resc):
    if resc.dim != model.dim:
        raise ConfigError(
            f"chart mismatch: rescaling potential has {resc.dim} coordinates, "
            f"model {model.name!r} has {model.dim}"
        )
    pot_names = getattr(resc.potential, "coord_names", None)
    if pot_names is not None and tuple(pot_names) != model.coord_names:
        raise ConfigError(
            f"chart mismatch: potential is written in {list(pot_names)}, "
            f"model uses {list(model.coord_names)}"
        )


def rescaled_model(model, resc, sym_weight=1.0):
    """The model carrying g-tilde = eta g and the shifted, rescaled skewness."""
    _check_chart(model, resc)
    mode = "fd" if (model.mode == "fd" or getattr(resc.potential, "mode", "jet") == "fd") else "jet"
    return ManifoldModel(
        dim=model.dim,
        coord_names=model.coord_names,
        metric=_ScaledMetricField(model.metric, resc),
        skewness=_ShiftedSkewnessField(model, resc, sym_weight),
        domain=model.domain,
        name=f"{model.name}~rescaled",
        mode=mode,
    )


def transform_density(d, resc):
    """f-tilde = eta^r f, keeping the weight tag."""
    return WeightedDensity(_PoweredScaleField(d.f, resc, d.r), d.r)


def transform_coupling(c, resc):
    """lam-tilde = lam / eta^a, keeping the exponent."""
    return NonlinearCoupling(_PoweredScaleField(c.lam, resc, -c.a), c.a)


# -- closed-form shift predictions ------------------------------------------


def connection_shift_prediction(resc, p):
    """Predicted Gamma-tilde minus Gamma: -alpha (delta^k_i psi_j + delta^k_j psi_i).

    Independent of the model: the metric-derivative and skewness-shift
    contributions to the rescaled connection cancel except for these two
    soldering terms.
    """
    psi = resc.psi(p).components
    n = resc.dim
    eye = np.eye(n)
    comps = -resc.alpha * (
        np.einsum("ki,j->kij", eye, psi) + np.einsum("kj,i->kij", eye, psi)
    )
    return Tensor(n, (CONTRA, COV, COV), comps)


def _psi_shift_core(model, resc, p):
    """M_ij = (nabla^alpha psi)_ij + alpha psi_i psi_j on the base model."""
    _check_chart(model, resc)
    point = model.require_inside(as_point(p))
    ws = PointGeometry(model, resc.alpha, point)
    pj = resc.psi_jet(point.coords, 1)
    psi, dpsi = pj.value, pj.d1
    # (nabla psi)_ij = d_i psi_j - Gamma^k_ij psi_k; dpsi[j, i] = d_i psi_j
    grad = np.einsum("ji->ij", dpsi) - np.einsum("kij,k->ij", ws.gamma, psi)
    return grad + resc.alpha * np.einsum("i,j->ij", psi, psi)


def ricci_shift_prediction(model, resc, p):
    """Predicted Ric-tilde minus Ric: (n-1) alpha (nabla psi + alpha psi psi)."""
    m = _psi_shift_core(model, resc, p)
    return Tensor(model.dim, (COV, COV), (model.dim - 1) * resc.alpha * m)


def curvature_shift_prediction(model, resc, p):
    """Predicted Riem-tilde minus Riem, as delta-slot insertions of the
    psi-shift core; its first/third-slot trace is the Ricci prediction."""
    m = _psi_shift_core(model, resc, p)
    eye = np.eye(model.dim)
    comps = resc.alpha * (
        np.einsum("ik,lj->ijkl", eye, m) - np.einsum("il,kj->ijkl", eye, m)
    )
    return Tensor(model.dim, (CONTRA, COV, COV, COV), comps)
