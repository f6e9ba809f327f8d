"""Dense chart-local tensor values and the scalar-field evaluation layer.

Everything here is pointwise and tiny: statistical manifolds live in a
handful of dimensions, so tensors are dense ndarrays with an explicit
variance signature, and index gymnastics go through einsum.  Slot 0 is
always the leftmost written index.
"""

from dataclasses import dataclass, field

import numpy as np

from . import jets
from .errors import (
    DimensionMismatchError,
    DomainError,
    SingularMetricError,
    UnsupportedOrderError,
    VarianceError,
)

COV = "cov"
CONTRA = "contra"


@dataclass(frozen=True)
class Point:
    """An ordered tuple of chart coordinates."""

    coords: tuple

    def __init__(self, coords):
        coords = tuple(float(c) for c in coords)
        if not all(np.isfinite(c) for c in coords):
            raise DomainError(f"non-finite coordinates: {coords}")
        object.__setattr__(self, "coords", coords)

    def __len__(self):
        return len(self.coords)

    def __getitem__(self, i):
        return self.coords[i]

    def __iter__(self):
        return iter(self.coords)

    def array(self):
        return np.asarray(self.coords)


def as_point(p):
    return p if isinstance(p, Point) else Point(p)


@dataclass(frozen=True)
class Tensor:
    """A dense tensor at a point: dimension, slot variances, components.

    ``variance`` lists one of ``"cov"`` / ``"contra"`` per slot, leftmost
    written index first.  Components are stored fully, no symmetry packing.
    """

    dim: int
    variance: tuple
    components: np.ndarray = field(repr=False)

    def __init__(self, dim, variance, components):
        variance = tuple(variance)
        if any(v not in (COV, CONTRA) for v in variance):
            raise VarianceError(f"unknown slot kind in {variance}")
        components = np.asarray(components, dtype=float)
        if components.shape != (dim,) * len(variance):
            raise DimensionMismatchError(
                f"components shape {components.shape} != {(dim,) * len(variance)}"
            )
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "variance", variance)
        object.__setattr__(self, "components", components)

    @property
    def rank(self):
        return len(self.variance)

    def is_fully_symmetric(self, tol=0.0):
        """Componentwise equality under every index permutation."""
        from itertools import permutations

        c = self.components
        for perm in permutations(range(self.rank)):
            if not np.allclose(c, np.transpose(c, perm), rtol=0.0, atol=tol):
                return False
        return True


def contract(t, slot_a, slot_b):
    """Trace a contravariant slot against a covariant slot.

    The surviving slots keep their original left-to-right order.
    """
    if slot_a == slot_b:
        raise VarianceError("cannot contract a slot with itself")
    kinds = {t.variance[slot_a], t.variance[slot_b]}
    if kinds != {COV, CONTRA}:
        raise VarianceError(
            f"contraction needs one covariant and one contravariant slot, "
            f"got {t.variance[slot_a]} and {t.variance[slot_b]}"
        )
    components = np.trace(t.components, axis1=slot_a, axis2=slot_b)
    variance = tuple(v for i, v in enumerate(t.variance) if i not in (slot_a, slot_b))
    if not variance:
        return float(components)
    return Tensor(t.dim, variance, components)


def raise_index(t, slot, g_inv):
    """Flip a covariant slot to contravariant with the inverse metric."""
    if t.variance[slot] != COV:
        raise VarianceError(f"slot {slot} is not covariant")
    ginv = g_inv.components if isinstance(g_inv, Tensor) else np.asarray(g_inv, dtype=float)
    components = np.tensordot(t.components, ginv, axes=([slot], [0]))
    # tensordot appends the new axis; rotate it back into the slot's place
    components = np.moveaxis(components, -1, slot)
    variance = list(t.variance)
    variance[slot] = CONTRA
    return Tensor(t.dim, tuple(variance), components)


def invert_metric(g):
    """Inverse of a symmetric positive-definite cov-2 tensor.

    Raises :class:`SingularMetricError` (reporting the smallest eigenvalue)
    when positive-definiteness fails.
    """
    m = g.components if isinstance(g, Tensor) else np.asarray(g, dtype=float)
    eigs = np.linalg.eigvalsh(0.5 * (m + m.T))
    if eigs[0] <= 0.0:
        raise SingularMetricError(
            f"metric is not positive-definite (min eigenvalue {eigs[0]:.3e})",
            min_eigenvalue=float(eigs[0]),
        )
    inv = np.linalg.inv(m)
    inv = 0.5 * (inv + inv.T)
    if isinstance(g, Tensor):
        return Tensor(g.dim, (CONTRA, CONTRA), inv)
    return inv


def symmetrize_cov3(u, g):
    """The symmetric 3-tensor g_ij u_k + g_jk u_i + g_ki u_j.

    The three-term cyclic sum is deliberately unnormalized: it is the unique
    weight for which the conformal change of the Levi-Civita connection and
    the skewness correction cancel their g_ij-proportional parts, making the
    predicted connection shift hold identically.
    """
    uc = u.components if isinstance(u, Tensor) else np.asarray(u, dtype=float)
    gc = g.components if isinstance(g, Tensor) else np.asarray(g, dtype=float)
    n = uc.shape[0]
    if gc.shape != (n, n):
        raise DimensionMismatchError(f"dimension mismatch: u has {n}, g has {gc.shape}")
    out = np.empty((n, n, n))
    for i in range(n):
        for j in range(i, n):
            for k in range(j, n):
                s = gc[i, j] * uc[k] + gc[j, k] * uc[i] + gc[k, i] * uc[j]
                # one representative per symmetry class keeps the result
                # bitwise permutation-invariant
                for p, q, r in ((i, j, k), (i, k, j), (j, i, k),
                                (j, k, i), (k, i, j), (k, j, i)):
                    out[p, q, r] = s
    return Tensor(n, (COV, COV, COV), out)


# -- tensor-field jets ------------------------------------------------------


class TensorJet:
    """Derivatives of a tensor field at a point, stacked into float arrays.

    ``value`` has the component shape; each derivative array appends one
    trailing coordinate axis per order (``d1[..., k]`` is the k-partial).
    """

    __slots__ = ("dim", "order", "value", "d1", "d2", "d3")

    def __init__(self, dim, order, value, d1=None, d2=None, d3=None):
        self.dim = dim
        self.order = order
        self.value = value
        self.d1 = d1
        self.d2 = d2
        self.d3 = d3

    def deriv(self, k):
        return (self.value, self.d1, self.d2, self.d3)[k]


def stack_jets(jet_grid, dim, order):
    """Stack a nested list (or object array) of scalar jets into a TensorJet."""
    grid = np.asarray(jet_grid, dtype=object)
    shape = grid.shape
    flat = grid.reshape(-1)
    parts = [np.empty(shape) if shape else np.empty(())]
    for k in range(1, order + 1):
        parts.append(np.empty(shape + (dim,) * k))
    out_flat = [p.reshape((-1,) + p.shape[len(shape):]) for p in parts]
    for idx, jet in enumerate(flat):
        for k in range(order + 1):
            out_flat[k][idx] = jet.deriv(k)
    return TensorJet(dim, order, *parts)


# -- scalar fields ----------------------------------------------------------


class ScalarField:
    """A scalar quantity on the chart, evaluable with derivatives.

    Subclasses fix how derivatives are obtained: exact jet arithmetic for
    analytic rules and parsed expressions, fourth-order central differences
    for black-box callables.  Evaluation at a fixed point is deterministic.
    """

    mode = "jet"
    domain = None

    def jet(self, coords, order):
        raise NotImplementedError

    def __call__(self, p):
        return self.jet(as_point(p).coords, 0).value


class FuncField(ScalarField):
    """Analytic rule written over coordinate jets (exact derivatives)."""

    def __init__(self, fn, dim, domain=None):
        self.fn = fn
        self.dim = dim
        self.domain = domain

    def jet(self, coords, order):
        out = self.fn(jets.seed(coords, order))
        if not isinstance(out, jets.Jet):
            out = jets.Jet.constant(float(out), len(tuple(coords)), order)
        return out


class NumericField(ScalarField):
    """Black-box float callable; derivatives by finite differences."""

    mode = "fd"

    def __init__(self, fn, dim, domain=None):
        self.fn = fn
        self.dim = dim
        self.domain = domain

    def jet(self, coords, order):
        return jets.finite_difference_jet(self.fn, coords, order)


class ConstantField(ScalarField):
    def __init__(self, value, dim):
        self.value = float(value)
        self.dim = dim

    def jet(self, coords, order):
        return jets.Jet.constant(self.value, len(tuple(coords)), order)


def evaluate_jet(field, p, order):
    """Value and all mixed partials of ``field`` at ``p`` up to ``order``.

    Orders above 3 are rejected: nothing downstream differentiates deeper
    than curvature, which consumes third metric derivatives.
    """
    if order > jets.MAX_ORDER or order < 0:
        raise UnsupportedOrderError(f"order {order} not supported (max {jets.MAX_ORDER})")
    point = as_point(p)
    if field.domain is not None and not field.domain.contains(point):
        raise DomainError(f"point {point.coords} outside the field's domain")
    return field.jet(point.coords, order)
