"""Forward-mode jets: values together with mixed partial derivatives.

A :class:`Jet` carries the value of a scalar quantity and all of its mixed
partial derivatives with respect to ``dim`` chart coordinates, up to a
truncation ``order`` of at most 3.  Arithmetic on jets propagates the
derivative arrays exactly (Leibniz rule for products, Faa di Bruno for the
elementary functions), so derivatives of any analytic expression built from
seeded coordinate jets are exact to roundoff.  Third order is the deepest
anything downstream needs: curvature differentiates Christoffel symbols,
which already consume metric derivatives.

Derivative axes trail the value axes: ``d1[..., i]`` is the first partial
with respect to coordinate ``i``, ``d2[..., i, j]`` the second, and so on.
The value may be a scalar or any ndarray, which lets a single evaluation
carry a whole batch of Monte-Carlo samples through the same arithmetic.

For black-box callables that only map coordinates to floats,
:func:`finite_difference_jet` fills the same structure with fourth-order
central differences.
"""

import math

import numpy as np

from .errors import DomainError, UnsupportedOrderError

MAX_ORDER = 3

_EPS = float(np.finfo(float).eps)


def _bc(value, k):
    """Append ``k`` singleton axes so a value broadcasts against a rank-k derivative."""
    if k == 0 or np.ndim(value) == 0:
        return value
    return np.reshape(value, np.shape(value) + (1,) * k)


def _elem(value, fn_scalar, fn_array):
    if isinstance(value, np.ndarray):
        return fn_array(value)
    return fn_scalar(value)


class Jet:
    """Value plus mixed partials up to ``order`` with respect to ``dim`` coordinates."""

    __slots__ = ("dim", "order", "value", "d1", "d2", "d3")

    # Keep numpy from broadcasting elementwise over a Jet operand; binary ops
    # with ndarrays then fall back to the reflected Jet methods.
    __array_ufunc__ = None

    def __init__(self, dim, order, value, d1=None, d2=None, d3=None):
        if not 0 <= order <= MAX_ORDER:
            raise UnsupportedOrderError(f"jet order must be in [0, {MAX_ORDER}], got {order}")
        self.dim = dim
        self.order = order
        self.value = value
        self.d1 = d1
        self.d2 = d2
        self.d3 = d3

    # -- construction -----------------------------------------------------

    @classmethod
    def constant(cls, value, dim, order):
        shape = np.shape(value)
        d1 = d2 = d3 = None
        if order >= 1:
            d1 = np.zeros(shape + (dim,))
        if order >= 2:
            d2 = np.zeros(shape + (dim, dim))
        if order >= 3:
            d3 = np.zeros(shape + (dim, dim, dim))
        return cls(dim, order, value, d1, d2, d3)

    @classmethod
    def variable(cls, value, index, dim, order):
        """Seed coordinate ``index``: unit first derivative, zero higher ones."""
        if not 0 <= index < dim:
            raise IndexError(f"coordinate index {index} out of range for dim {dim}")
        jet = cls.constant(float(value), dim, order)
        if order >= 1:
            jet.d1[index] = 1.0
        return jet

    def _lift(self, other):
        if isinstance(other, Jet):
            if other.dim != self.dim:
                raise ValueError(f"jet dims differ: {self.dim} vs {other.dim}")
            if other.order != self.order:
                raise ValueError(f"jet orders differ: {self.order} vs {other.order}")
            return other
        return Jet.constant(other, self.dim, self.order)

    # -- accessors --------------------------------------------------------

    def deriv(self, k):
        """The order-``k`` derivative array (``k = 0`` gives the value)."""
        return (self.value, self.d1, self.d2, self.d3)[k]

    def truncate(self, order):
        """A view of this jet keeping derivatives only up to ``order``."""
        if order > self.order:
            raise UnsupportedOrderError(f"cannot extend jet of order {self.order} to {order}")
        parts = [self.d1, self.d2, self.d3][:order]
        return Jet(self.dim, order, self.value, *parts)

    def partial(self, index):
        """The jet of the partial derivative with respect to coordinate ``index``.

        Drops one order: the k-th derivative of the result is the (k+1)-th of
        this jet with its last axis fixed at ``index``.
        """
        if self.order < 1:
            raise UnsupportedOrderError("cannot take the partial of an order-0 jet")
        parts = []
        for k in range(1, self.order + 1):
            parts.append(self.deriv(k)[..., index])
        return Jet(self.dim, self.order - 1, parts[0], *parts[1:])

    # -- ring operations --------------------------------------------------

    def __add__(self, other):
        g = self._lift(other)
        parts = [self.deriv(k) + g.deriv(k) for k in range(1, self.order + 1)]
        return Jet(self.dim, self.order, self.value + g.value, *parts)

    __radd__ = __add__

    def __neg__(self):
        parts = [-self.deriv(k) for k in range(1, self.order + 1)]
        return Jet(self.dim, self.order, -self.value, *parts)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        g = self._lift(other)
        f = self
        n, m = f.dim, f.order
        value = f.value * g.value
        parts = []
        if m >= 1:
            parts.append(_bc(f.value, 1) * g.d1 + _bc(g.value, 1) * f.d1)
        if m >= 2:
            cross = np.einsum("...i,...j->...ij", f.d1, g.d1)
            parts.append(
                _bc(f.value, 2) * g.d2
                + _bc(g.value, 2) * f.d2
                + cross
                + np.swapaxes(cross, -1, -2)
            )
        if m >= 3:
            d3 = _bc(f.value, 3) * g.d3 + _bc(g.value, 3) * f.d3
            for a, b in ((f, g), (g, f)):
                d3 = d3 + np.einsum("...ij,...k->...ijk", a.d2, b.d1)
                d3 = d3 + np.einsum("...ik,...j->...ijk", a.d2, b.d1)
                d3 = d3 + np.einsum("...jk,...i->...ijk", a.d2, b.d1)
            parts.append(d3)
        return Jet(n, m, value, *parts)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * self._lift(other)._reciprocal()

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def _reciprocal(self):
        v = self.value
        inv = 1.0 / v
        return self._compose(inv, -(inv * inv), 2.0 * inv ** 3, -6.0 * inv ** 4)

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            return exp(exponent * log(self))
        e = float(exponent)
        if e == 0.0:
            return Jet.constant(np.ones(np.shape(self.value)) if np.ndim(self.value) else 1.0,
                                self.dim, self.order)
        if e == 1.0:
            return self
        if not e.is_integer():
            if np.any(np.asarray(self.value) < 0.0):
                raise DomainError(f"negative base raised to fractional exponent {e}")
            if np.any(np.asarray(self.value) == 0.0):
                raise DomainError(f"zero base raised to fractional exponent {e}")
        v = self.value

        def coeff(factor, power):
            # A vanishing prefactor kills the term before v**power can blow up
            # (e.g. the third derivative of v**2 at v = 0).
            if factor == 0.0:
                return 0.0
            return factor * v ** power

        c0 = v ** e
        c1 = coeff(e, e - 1)
        c2 = coeff(e * (e - 1), e - 2)
        c3 = coeff(e * (e - 1) * (e - 2), e - 3)
        return self._compose(c0, c1, c2, c3)

    def __rpow__(self, base):
        return exp(self * _elem(base, math.log, np.log))

    # -- composition with a smooth univariate function --------------------

    def _compose(self, c0, c1, c2, c3):
        """Chain rule through phi given phi(v), phi'(v), phi''(v), phi'''(v)."""
        m = self.order
        parts = []
        if m >= 1:
            parts.append(_bc(c1, 1) * self.d1)
        if m >= 2:
            outer11 = np.einsum("...i,...j->...ij", self.d1, self.d1)
            parts.append(_bc(c2, 2) * outer11 + _bc(c1, 2) * self.d2)
        if m >= 3:
            outer111 = np.einsum("...i,...j,...k->...ijk", self.d1, self.d1, self.d1)
            mix = (
                np.einsum("...ij,...k->...ijk", self.d2, self.d1)
                + np.einsum("...ik,...j->...ijk", self.d2, self.d1)
                + np.einsum("...jk,...i->...ijk", self.d2, self.d1)
            )
            parts.append(_bc(c3, 3) * outer111 + _bc(c2, 3) * mix + _bc(c1, 3) * self.d3)
        return Jet(self.dim, m, c0, *parts)

    def __repr__(self):
        return f"Jet(dim={self.dim}, order={self.order}, value={self.value!r})"


# -- elementary functions (accept Jet or plain number) ---------------------


def exp(x):
    if not isinstance(x, Jet):
        return _elem(x, math.exp, np.exp)
    v = _elem(x.value, math.exp, np.exp)
    return x._compose(v, v, v, v)


def log(x):
    if not isinstance(x, Jet):
        return _elem(x, math.log, np.log)
    if np.any(np.asarray(x.value) <= 0.0):
        raise DomainError("log of a non-positive value")
    v = x.value
    inv = 1.0 / v
    return x._compose(_elem(v, math.log, np.log), inv, -(inv * inv), 2.0 * inv ** 3)


def sqrt(x):
    if not isinstance(x, Jet):
        return _elem(x, math.sqrt, np.sqrt)
    if np.any(np.asarray(x.value) < 0.0):
        raise DomainError("sqrt of a negative value")
    r = _elem(x.value, math.sqrt, np.sqrt)
    inv = 1.0 / x.value
    return x._compose(r, 0.5 * r * inv, -0.25 * r * inv * inv, 0.375 * r * inv ** 3)


def sin(x):
    if not isinstance(x, Jet):
        return _elem(x, math.sin, np.sin)
    s = _elem(x.value, math.sin, np.sin)
    c = _elem(x.value, math.cos, np.cos)
    return x._compose(s, c, -s, -c)


def cos(x):
    if not isinstance(x, Jet):
        return _elem(x, math.cos, np.cos)
    s = _elem(x.value, math.sin, np.sin)
    c = _elem(x.value, math.cos, np.cos)
    return x._compose(c, -s, -c, s)


def seed(coords, order):
    """Variable jets for a coordinate tuple, one per chart coordinate."""
    coords = [float(c) for c in coords]
    n = len(coords)
    return [Jet.variable(c, i, n, order) for i, c in enumerate(coords)]


# -- finite-difference jets for black-box callables ------------------------

# Fourth-order central stencils: (offsets, weights, power of h in the divisor).
_STENCILS = {
    1: ((-2, -1, 1, 2), (1.0, -8.0, 8.0, -1.0), 12.0),
    2: ((-2, -1, 0, 1, 2), (-1.0, 16.0, -30.0, 16.0, -1.0), 12.0),
    3: ((-3, -2, -1, 1, 2, 3), (1.0, -8.0, 13.0, -13.0, 8.0, -1.0), 8.0),
}


def _fd_step(order, coord):
    return _EPS ** (1.0 / (order + 2)) * max(1.0, abs(coord))


def _fd_partial(fn, x, axes):
    """One mixed partial by a tensor product of per-axis central stencils.

    ``axes`` maps coordinate index to derivative multiplicity; the stencil for
    each axis matches its multiplicity, and the step follows the total order.
    """
    total = sum(axes.values())
    plan = []
    scale = 1.0
    for axis, mult in axes.items():
        offsets, weights, divisor = _STENCILS[mult]
        h = _fd_step(total, x[axis])
        scale /= divisor * h ** mult
        plan.append((axis, h, offsets, weights))

    def recurse(point, level, weight):
        if level == len(plan):
            return weight * fn(np.array(point))
        axis, h, offsets, weights = plan[level]
        acc = 0.0
        for off, w in zip(offsets, weights):
            shifted = list(point)
            shifted[axis] += off * h
            acc += recurse(shifted, level + 1, weight * w)
        return acc

    return scale * recurse(list(x), 0, 1.0)


def finite_difference_jet(fn, coords, order):
    """Jet of a black-box callable, via fourth-order central differences.

    ``fn`` may return a float or an ndarray; array values give a jet whose
    derivative axes trail the value axes, i.e. the jet of a whole tensor
    field in one pass.  Every mixed partial is mirrored across index
    permutations, so the symmetry invariant holds exactly.  Truncation error
    is O(h^4); with the eps^(1/(order+2)) step rule the third-order partials
    keep roughly seven significant digits.
    """
    if not 0 <= order <= MAX_ORDER:
        raise UnsupportedOrderError(f"finite-difference order must be in [0, {MAX_ORDER}]")
    x = np.asarray([float(c) for c in coords])
    n = x.size
    f0 = np.asarray(fn(x.copy()), dtype=float)
    jet = Jet.constant(float(f0) if f0.ndim == 0 else f0, n, order)
    if order >= 1:
        for i in range(n):
            jet.d1[..., i] = _fd_partial(fn, x, {i: 1})
    if order >= 2:
        for i in range(n):
            for j in range(i, n):
                axes = {i: 2} if i == j else {i: 1, j: 1}
                val = _fd_partial(fn, x, axes)
                jet.d2[..., i, j] = jet.d2[..., j, i] = val
    if order >= 3:
        for i in range(n):
            for j in range(i, n):
                for k in range(j, n):
                    axes = {}
                    for a in (i, j, k):
                        axes[a] = axes.get(a, 0) + 1
                    val = _fd_partial(fn, x, axes)
                    for p, q, r in ((i, j, k), (i, k, j), (j, i, k),
                                    (j, k, i), (k, i, j), (k, j, i)):
                        jet.d3[..., p, q, r] = val
    return jet
