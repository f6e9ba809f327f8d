"""Statistical-manifold models: metric and skewness fields on a chart.

A model bundles the Fisher metric g, the third-moment skewness tensor t,
coordinate names, and a domain predicate.  Three sources are supported:

* built-in closed forms (Gaussian location-scale, multinomial simplex,
  flat Euclidean test chart), shipped as parsed expressions so that every
  model serializes and differentiates the same way;
* user configs in JSON, one expression per independent tensor component;
* black-box callables, differentiated by finite differences.

Tensor-field evaluations return array-valued jets: ``.value`` has the
component shape and each derivative axis trails it, ready for the geometry
layer's contractions.  Component symmetry is enforced by evaluating one
representative per index class and mirroring, so it holds bitwise.

The Monte-Carlo oracle (:func:`estimate_fisher_tensors`) derives g and t
from score moments of a sampled log-likelihood, independently of the closed
forms, with componentwise standard errors.
"""

import json
import math
import re
from dataclasses import dataclass
from itertools import combinations_with_replacement, permutations

import numpy as np

from . import expr, jets
from .errors import ConfigError, DomainError, EvaluationError
from .tensor_core import COV, CONTRA, Point, ScalarField, Tensor, as_point

DOMAIN_MARGIN = 1e-6

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class Domain:
    """Open box bounds per coordinate, optionally cut by the unit simplex.

    Points closer than ``margin`` to any face are rejected: curvature
    quantities blow up at the boundary, so extrapolation there is refused
    rather than attempted.
    """

    bounds: tuple
    simplex: bool = False
    margin: float = DOMAIN_MARGIN

    def contains(self, p):
        p = as_point(p)
        if len(p) != len(self.bounds):
            return False
        for c, (lo, hi) in zip(p, self.bounds):
            if lo is not None and c < lo + self.margin:
                return False
            if hi is not None and c > hi - self.margin:
                return False
        if self.simplex and sum(p.coords) > 1.0 - self.margin:
            return False
        return True


def unbounded_domain(dim):
    return Domain(((None, None),) * dim)


# -- tensor fields ----------------------------------------------------------


def _mirror_assign(out_jet, index, value_jet, order):
    for perm in set(permutations(index)):
        out_jet.value[perm] = value_jet.value
        for k in range(1, order + 1):
            out_jet.deriv(k)[perm] = value_jet.deriv(k)


class TensorField:
    """A field of fully covariant, index-symmetric tensor components."""

    mode = "jet"

    def jet(self, coords, order):
        """Array-valued jet of all components at ``coords``."""
        raise NotImplementedError

    def at(self, p):
        comps = self.jet(as_point(p).coords, 0).value
        return Tensor(self.dim, (COV,) * self.rank, comps)


class ExprTensorField(TensorField):
    """Components given as expressions over the chart coordinates.

    ``entries`` maps a sorted index tuple (one representative per symmetry
    class, 0-based) to a parsed :class:`~cupgeo.expr.Expression`; unlisted
    components are zero.
    """

    def __init__(self, dim, rank, coord_names, entries):
        self.dim = dim
        self.rank = rank
        self.coord_names = tuple(coord_names)
        self.entries = dict(entries)

    def jet(self, coords, order):
        env = dict(zip(self.coord_names, jets.seed(coords, order)))
        out = jets.Jet.constant(np.zeros((self.dim,) * self.rank), self.dim, order)
        for index, expression in self.entries.items():
            try:
                val = expression(env)
            except Exception as e:
                raise EvaluationError(
                    f"component {index} ({expression.source!r}) failed at {tuple(coords)}: {e}"
                ) from e
            if not isinstance(val, jets.Jet):
                val = jets.Jet.constant(float(val), self.dim, order)
            _mirror_assign(out, index, val, order)
        return out


def _component_symmetrize(arr, rank):
    if rank < 2:
        return arr
    if rank == 2:
        return 0.5 * (arr + np.swapaxes(arr, 0, 1))
    out = np.empty_like(arr)
    n = arr.shape[0]
    for index in combinations_with_replacement(range(n), rank):
        perms = set(permutations(index))
        mean = sum(arr[p] for p in sorted(perms)) / len(perms)
        for p in perms:
            out[p] = mean
    return out


class NumericTensorField(TensorField):
    """Black-box component callable; derivatives by finite differences.

    The raw output is symmetrized over component permutations before the
    stencil sees it, which both enforces the symmetry contract and keeps the
    FD derivatives exactly symmetric in their component axes.
    """

    mode = "fd"

    def __init__(self, dim, rank, fn):
        self.dim = dim
        self.rank = rank
        self.fn = fn

    def _sym_fn(self, x):
        arr = np.asarray(self.fn(x), dtype=float)
        if arr.shape != (self.dim,) * self.rank:
            raise EvaluationError(
                f"tensor callable returned shape {arr.shape}, expected {(self.dim,) * self.rank}"
            )
        return _component_symmetrize(arr, self.rank)

    def jet(self, coords, order):
        return jets.finite_difference_jet(self._sym_fn, coords, order)


# -- scalar fields bound to a chart -----------------------------------------


class ExprScalarField(ScalarField):
    """A scalar field parsed from an expression over named coordinates."""

    def __init__(self, source, coord_names, domain=None):
        self.source = source
        self.expression = source if isinstance(source, expr.Expression) else expr.Expression(source)
        if isinstance(source, expr.Expression):
            self.source = source.source
        self.coord_names = tuple(coord_names)
        self.dim = len(self.coord_names)
        self.domain = domain
        unknown = self.expression.variables - set(self.coord_names)
        if unknown:
            raise ConfigError(
                f"unknown identifier(s) {sorted(unknown)} in {self.source!r}; "
                f"chart coordinates are {list(self.coord_names)}"
            )

    def jet(self, coords, order):
        env = dict(zip(self.coord_names, jets.seed(coords, order)))
        val = self.expression(env)
        if not isinstance(val, jets.Jet):
            val = jets.Jet.constant(float(val), len(self.coord_names), order)
        return val


# -- models -----------------------------------------------------------------


@dataclass(frozen=True)
class SampleSpec:
    """Inputs for the Monte-Carlo tensor oracle.

    ``sampler(point, size, rng)`` draws ``size`` samples along a leading
    axis; ``log_likelihood(samples, coord_jets)`` must broadcast over that
    axis and be differentiable in the coordinate jets.
    """

    log_likelihood: object
    sampler: object
    count: int
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError(f"sample count must be >= 1, got {self.count}")


class ManifoldModel:
    """Dimension, coordinates, metric field, skewness field, domain.

    Immutable after construction; evaluations are pure.  ``mode`` records
    how derivatives are obtained ("jet" exact, "fd" finite differences),
    which downstream tolerance defaults key off.
    """

    def __init__(self, dim, coord_names, metric, skewness, domain, name="model",
                 mode="jet", metric_exprs=None, skewness_exprs=None, sample_spec_factory=None):
        if dim < 1:
            raise ConfigError(f"dimension must be >= 1, got {dim}")
        if len(coord_names) != dim:
            raise ConfigError(f"{dim} coordinates expected, got {len(coord_names)}")
        self.dim = dim
        self.coord_names = tuple(coord_names)
        self.metric = metric
        self.skewness = skewness
        self.domain = domain
        self.name = name
        self.mode = mode
        self.metric_exprs = metric_exprs
        self.skewness_exprs = skewness_exprs
        self.sample_spec_factory = sample_spec_factory

    def require_inside(self, p):
        p = as_point(p)
        if len(p) != self.dim:
            raise DomainError(
                f"point {p.coords} has {len(p)} coordinates, model {self.name!r} has {self.dim}"
            )
        if not self.domain.contains(p):
            raise DomainError(f"point {p.coords} outside the domain of model {self.name!r}")
        return p

    def metric_jet(self, p, order):
        p = self.require_inside(p)
        return self.metric.jet(p.coords, order)

    def skewness_jet(self, p, order):
        p = self.require_inside(p)
        return self.skewness.jet(p.coords, order)

    def metric_at(self, p):
        return Tensor(self.dim, (COV, COV), self.metric_jet(p, 0).value)

    def skewness_at(self, p):
        return Tensor(self.dim, (COV,) * 3, self.skewness_jet(p, 0).value)

    def scalar_field(self, source):
        """Parse an expression in this model's coordinates."""
        return ExprScalarField(source, self.coord_names, domain=self.domain)

    def sample_spec(self, count, seed=0):
        if self.sample_spec_factory is None:
            raise ConfigError(f"model {self.name!r} has no sampling rule attached")
        return self.sample_spec_factory(count, seed)


# -- built-in families ------------------------------------------------------


def _expr_entries(raw, rank, dim, coord_names, what):
    """Parse {"ij": source} into {sorted 0-based tuple: Expression}.

    Keys are 1-based index strings, one digit per slot (comma-separated for
    dimensions above 9).  A listed component propagates to all permutations;
    two keys landing in the same symmetry class with different expressions
    conflict.
    """
    entries = {}
    sources = {}
    for key, source in raw.items():
        digits = key.split(",") if "," in key else list(key)
        if len(digits) != rank:
            raise ConfigError(f"{what} key {key!r} must have {rank} indices")
        try:
            index = tuple(int(d) - 1 for d in digits)
        except ValueError:
            raise ConfigError(f"{what} key {key!r} is not an index tuple") from None
        if not all(0 <= i < dim for i in index):
            raise ConfigError(f"{what} key {key!r} out of range for dimension {dim}")
        rep = tuple(sorted(index))
        if not isinstance(source, str):
            raise ConfigError(f"{what} entry {key!r} must be an expression string")
        if rep in entries:
            if sources[rep] != source:
                raise ConfigError(
                    f"conflicting {what} entries for symmetry class {rep}: "
                    f"{sources[rep]!r} vs {source!r}"
                )
            continue
        try:
            parsed = expr.Expression(source)
        except Exception as e:
            raise ConfigError(f"{what} entry {key!r}: {e}") from e
        unknown = parsed.variables - set(coord_names)
        if unknown:
            raise ConfigError(
                f"{what} entry {key!r} uses unknown identifier(s) {sorted(unknown)}"
            )
        entries[rep] = parsed
        sources[rep] = source
    return entries, sources


def _canonical_key(index):
    if any(i > 8 for i in index):
        return ",".join(str(i + 1) for i in index)
    return "".join(str(i + 1) for i in index)


def _expr_model(name, coord_names, metric_raw, skewness_raw, domain, sample_spec_factory=None):
    dim = len(coord_names)
    metric_entries, metric_src = _expr_entries(metric_raw, 2, dim, coord_names, "metric")
    skew_entries, skew_src = _expr_entries(skewness_raw, 3, dim, coord_names, "skewness")
    return ManifoldModel(
        dim=dim,
        coord_names=coord_names,
        metric=ExprTensorField(dim, 2, coord_names, metric_entries),
        skewness=ExprTensorField(dim, 3, coord_names, skew_entries),
        domain=domain,
        name=name,
        mode="jet",
        metric_exprs={_canonical_key(k): v for k, v in metric_src.items()},
        skewness_exprs={_canonical_key(k): v for k, v in skew_src.items()},
        sample_spec_factory=sample_spec_factory,
    )


_LOG_2PI = math.log(2.0 * math.pi)


def gaussian_model():
    """The two-parameter Gaussian family in (mean, scale) coordinates.

    Closed forms are the classical score moments: g = diag(1/s^2, 2/s^2)
    and the only nonzero skewness classes t_(mean,mean,scale) = 2/s^3,
    t_(scale,scale,scale) = 8/s^3.
    """

    def spec_factory(count, seed):
        def sampler(point, size, rng):
            return rng.normal(point[0], point[1], size)

        def log_likelihood(x, coord_jets):
            mu, sigma = coord_jets
            z = (x - mu) / sigma
            return -jets.log(sigma) - 0.5 * (z * z) - 0.5 * _LOG_2PI

        return SampleSpec(log_likelihood, sampler, count, seed)

    return _expr_model(
        "gaussian",
        ("mu", "sigma"),
        {"11": "1/sigma^2", "22": "2/sigma^2"},
        {"112": "2/sigma^3", "222": "8/sigma^3"},
        Domain(((None, None), (0.0, None))),
        sample_spec_factory=spec_factory,
    )


def multinomial_model(k):
    """The k-category discrete family on the open probability simplex.

    Coordinates are the first k-1 cell probabilities; the score moments give
    g_ij = kron_ij/p_i + 1/p_last and t_ijk = kron_ijk/p_i^2 - 1/p_last^2
    with p_last = 1 - sum of the others.
    """
    if k < 2:
        raise ConfigError(f"multinomial family needs at least 2 categories, got {k}")
    n = k - 1
    coords = tuple(f"p{i + 1}" for i in range(n))
    rest = "(1 - " + " - ".join(coords) + ")"
    metric = {}
    for i in range(n):
        for j in range(i, n):
            key = _canonical_key((i, j))
            metric[key] = f"1/{coords[i]} + 1/{rest}" if i == j else f"1/{rest}"
    skewness = {}
    for index in combinations_with_replacement(range(n), 3):
        key = _canonical_key(index)
        if index[0] == index[2]:
            skewness[key] = f"1/{coords[index[0]]}^2 - 1/{rest}^2"
        else:
            skewness[key] = f"-1/{rest}^2"

    def spec_factory(count, seed):
        def sampler(point, size, rng):
            probs = list(point.coords) + [1.0 - sum(point.coords)]
            cat = rng.choice(k, size=size, p=probs)
            onehot = np.zeros((size, k))
            onehot[np.arange(size), cat] = 1.0
            return onehot

        def log_likelihood(x, coord_jets):
            p_last = 1.0 - sum(coord_jets[1:], coord_jets[0])
            ll = x[:, n] * jets.log(p_last)
            for c in range(n):
                ll = ll + x[:, c] * jets.log(coord_jets[c])
            return ll

        return SampleSpec(log_likelihood, sampler, count, seed)

    return _expr_model(
        f"multinomial:{k}",
        coords,
        metric,
        skewness,
        Domain(((0.0, 1.0),) * n, simplex=True),
        sample_spec_factory=spec_factory,
    )


_EUCLIDEAN_NAMES = ("x", "y", "z", "w")


def euclidean_model(dim=2):
    """Flat test chart: identity metric, zero skewness, no boundary."""
    if dim < 1:
        raise ConfigError(f"dimension must be >= 1, got {dim}")
    if dim <= len(_EUCLIDEAN_NAMES):
        coords = _EUCLIDEAN_NAMES[:dim]
    else:
        coords = tuple(f"x{i + 1}" for i in range(dim))
    metric = {_canonical_key((i, i)): "1" for i in range(dim)}
    return _expr_model(f"euclidean:{dim}", coords, metric, {}, unbounded_domain(dim))


# -- Monte-Carlo oracle -----------------------------------------------------


@dataclass(frozen=True)
class FisherEstimate:
    """Score-moment estimates with componentwise standard errors.

    ``se_reliable`` is False for a single-sample run, where the variance is
    undefined and the error arrays are NaN.
    """

    metric: Tensor
    skewness: Tensor
    metric_se: np.ndarray
    skewness_se: np.ndarray
    count: int
    se_reliable: bool

    def __iter__(self):
        return iter((self.metric, self.skewness))


def estimate_fisher_tensors(spec, p, batch_size=250_000):
    """Sample-mean estimates of the score-moment tensors at ``p``.

    g is estimated by the mean of score outer products, t by the mean of
    score triple products; both converge at the usual count^(-1/2) rate.
    Fixed seed implies identical estimates.
    """
    point = as_point(p)
    n = len(point)
    rng = np.random.default_rng(spec.seed)
    coord_jets = jets.seed(point.coords, 1)
    pair_sum = np.zeros((n, n))
    pair_sq = np.zeros((n, n))
    triple_sum = np.zeros((n, n, n))
    triple_sq = np.zeros((n, n, n))
    remaining = spec.count
    while remaining > 0:
        size = min(batch_size, remaining)
        samples = spec.sampler(point, size, rng)
        ll = spec.log_likelihood(samples, coord_jets)
        if not isinstance(ll, jets.Jet):
            raise EvaluationError("log-likelihood did not propagate coordinate jets")
        score = np.asarray(ll.d1, dtype=float)
        if score.shape != (size, n):
            raise EvaluationError(
                f"score batch has shape {score.shape}, expected {(size, n)}"
            )
        if not np.all(np.isfinite(score)):
            raise EvaluationError(f"non-finite log-likelihood derivatives at {point.coords}")
        sq = score * score
        pair_sum += np.einsum("si,sj->ij", score, score)
        pair_sq += np.einsum("si,sj->ij", sq, sq)
        triple_sum += np.einsum("si,sj,sk->ijk", score, score, score)
        triple_sq += np.einsum("si,sj,sk->ijk", sq, sq, sq)
        remaining -= size
    count = spec.count

    def finish(total, total_sq):
        mean = total / count
        if count < 2:
            return mean, np.full_like(mean, np.nan)
        var = np.maximum(total_sq - count * mean * mean, 0.0) / (count - 1)
        return mean, np.sqrt(var / count)

    g_est, g_se = finish(pair_sum, pair_sq)
    t_est, t_se = finish(triple_sum, triple_sq)
    return FisherEstimate(
        metric=Tensor(n, (COV, COV), g_est),
        skewness=Tensor(n, (COV,) * 3, t_est),
        metric_se=g_se,
        skewness_se=t_se,
        count=count,
        se_reliable=count >= 2,
    )


# -- config round trip ------------------------------------------------------


def parse_model(config_text):
    """Build a model from a JSON config.

    Schema: ``dim`` (int), ``coords`` (list of identifiers), ``metric``
    (map "ij" -> expression), ``skewness`` (map "ijk" -> expression,
    optional), ``domain`` (map coordinate -> [low, high] with null for
    unbounded, plus an optional "simplex" flag).  Unlisted tensor components
    are zero; listed ones propagate to all index permutations.
    """
    try:
        data = json.loads(config_text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"model config is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("model config must be a JSON object")
    try:
        dim = int(data["dim"])
        coords = data["coords"]
        metric_raw = data["metric"]
    except KeyError as e:
        raise ConfigError(f"model config missing field {e.args[0]!r}") from None
    if dim < 1:
        raise ConfigError(f"dim must be >= 1, got {dim}")
    if (not isinstance(coords, list) or len(coords) != dim
            or not all(isinstance(c, str) and _IDENT.match(c) for c in coords)):
        raise ConfigError(f"coords must be {dim} identifier strings")
    if len(set(coords)) != dim:
        raise ConfigError("coordinate names must be distinct")
    if "simplex" in coords:
        raise ConfigError('"simplex" is reserved and cannot name a coordinate')
    if not isinstance(metric_raw, dict):
        raise ConfigError("metric must be a map of index keys to expressions")
    skewness_raw = data.get("skewness", {})
    if not isinstance(skewness_raw, dict):
        raise ConfigError("skewness must be a map of index keys to expressions")

    bounds = [(None, None)] * dim
    simplex = False
    domain_raw = data.get("domain", {})
    if not isinstance(domain_raw, dict):
        raise ConfigError("domain must be a map of coordinate names to bounds")
    for key, val in domain_raw.items():
        if key == "simplex":
            simplex = bool(val)
            continue
        if key not in coords:
            raise ConfigError(f"domain mentions unknown coordinate {key!r}")
        if not isinstance(val, list) or len(val) != 2:
            raise ConfigError(f"domain bounds for {key!r} must be a [low, high] pair")
        lo, hi = val
        bounds[coords.index(key)] = (
            None if lo is None else float(lo),
            None if hi is None else float(hi),
        )

    return _expr_model(
        str(data.get("name", "custom")),
        tuple(coords),
        metric_raw,
        skewness_raw,
        Domain(tuple(bounds), simplex=simplex),
    )


def serialize_model(model):
    """JSON config for a model built from expressions (inverse of parse_model).

    Expression sources are emitted verbatim, so parse/serialize round-trips
    are bit-exact on the expressions.
    """
    if model.metric_exprs is None or model.skewness_exprs is None:
        raise ConfigError(f"model {model.name!r} was not built from expressions")
    domain = {}
    for coord, (lo, hi) in zip(model.coord_names, model.domain.bounds):
        if lo is not None or hi is not None:
            domain[coord] = [lo, hi]
    if model.domain.simplex:
        domain["simplex"] = True
    data = {
        "name": model.name,
        "dim": model.dim,
        "coords": list(model.coord_names),
        "metric": dict(sorted(model.metric_exprs.items())),
        "skewness": dict(sorted(model.skewness_exprs.items())),
        "domain": domain,
    }
    return json.dumps(data, indent=2)


def model_from_callables(dim, coord_names, metric_fn, skewness_fn, domain=None, name="callable"):
    """Wrap black-box component callables as a finite-difference model."""
    domain = domain if domain is not None else unbounded_domain(dim)
    return ManifoldModel(
        dim=dim,
        coord_names=tuple(coord_names),
        metric=NumericTensorField(dim, 2, metric_fn),
        skewness=NumericTensorField(dim, 3, skewness_fn),
        domain=domain,
        name=name,
        mode="fd",
    )


_BUILTINS = {
    "gaussian": gaussian_model,
    "euclidean": euclidean_model,
}


def resolve_model(source):
    """A model from a built-in name ("gaussian", "multinomial:3",
    "euclidean:3") or a JSON config file path."""
    base, _, arg = source.partition(":")
    if base == "multinomial":
        try:
            return multinomial_model(int(arg) if arg else 3)
        except ValueError:
            raise ConfigError(f"bad multinomial category count {arg!r}") from None
    if base in _BUILTINS:
        if arg:
            try:
                return _BUILTINS[base](int(arg))
            except (TypeError, ValueError):
                raise ConfigError(f"bad model argument {arg!r} for {base!r}") from None
        return _BUILTINS[base]()
    try:
        with open(source, "r", encoding="utf-8") as fh:
            return parse_model(fh.read())
    except OSError:
        raise ConfigError(
            f"unknown model {source!r}: not a built-in name and not a readable config file"
        ) from None
