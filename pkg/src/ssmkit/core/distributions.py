"""Model-level distributions: sampling and log-densities.

Sampler and logpdf are mutually consistent for every kind (the test suite
checks normalization by quadrature and moments by simulation). Invalid
parameters raise DistributionParameterError; out-of-support values get a
log-density of -inf.
"""

import enum

import numpy as np
from scipy.special import gammaln, ndtr, ndtri

from ..errors import DistributionParameterError

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class DistKind(enum.Enum):
    GAUSSIAN = "gaussian"
    TRUNCATED_GAUSSIAN = "truncated_gaussian"
    GAMMA = "gamma"
    INVERSE_GAMMA = "inverse_gamma"
    UNIFORM = "uniform"
    WIENER = "wiener"


class DistInfo:
    def __init__(self, kind, params, required, defaults=()):
        self.kind = kind
        self.params = params  # canonical argument order
        self.required = required
        self.defaults = dict(defaults)


# `gaussian` and `normal` are aliases; the second argument is always the
# standard deviation. truncated_gaussian accepts positional or named
# lower/upper bounds, which default to +-inf.
REGISTRY = {
    "gaussian": DistInfo(DistKind.GAUSSIAN, ("mean", "sd"), 2),
    "normal": DistInfo(DistKind.GAUSSIAN, ("mean", "sd"), 2),
    "truncated_gaussian": DistInfo(
        DistKind.TRUNCATED_GAUSSIAN,
        ("mean", "sd", "lower", "upper"),
        2,
        defaults={"lower": -np.inf, "upper": np.inf},
    ),
    "gamma": DistInfo(DistKind.GAMMA, ("shape", "scale"), 2),
    "inverse_gamma": DistInfo(DistKind.INVERSE_GAMMA, ("shape", "scale"), 2),
    "uniform": DistInfo(DistKind.UNIFORM, ("lower", "upper"), 2),
    "wiener": DistInfo(DistKind.WIENER, (), 0),
}


def _require(ok, message):
    if not np.all(ok):
        raise DistributionParameterError(message)


def _check_params(kind, args):
    if kind is DistKind.GAUSSIAN:
        _require(np.asarray(args[1]) > 0, "gaussian sd must be > 0")
    elif kind is DistKind.TRUNCATED_GAUSSIAN:
        _require(np.asarray(args[1]) > 0, "truncated_gaussian sd must be > 0")
        _require(np.asarray(args[2]) < np.asarray(args[3]), "truncated_gaussian needs lower < upper")
    elif kind in (DistKind.GAMMA, DistKind.INVERSE_GAMMA):
        _require(np.asarray(args[0]) > 0, f"{kind.value} shape must be > 0")
        _require(np.asarray(args[1]) > 0, f"{kind.value} scale must be > 0")
    elif kind is DistKind.UNIFORM:
        _require(np.asarray(args[0]) < np.asarray(args[1]), "uniform needs lower < upper")


def sample(kind, args, size, rng):
    """Draw `size` values. `args` are in the registry's canonical order."""
    _check_params(kind, args)
    if kind is DistKind.GAUSSIAN:
        return rng.normal(args[0], args[1], size=size)
    if kind is DistKind.TRUNCATED_GAUSSIAN:
        mean, sd, lower, upper = (np.asarray(a, dtype=float) for a in args)
        fa = ndtr((lower - mean) / sd)
        fb = ndtr((upper - mean) / sd)
        _require(fb - fa > 0, "truncated_gaussian truncation region has no mass")
        u = rng.uniform(size=size)
        return mean + sd * ndtri(fa + u * (fb - fa))
    if kind is DistKind.GAMMA:
        return rng.gamma(args[0], args[1], size=size)
    if kind is DistKind.INVERSE_GAMMA:
        return 1.0 / rng.gamma(args[0], 1.0 / np.asarray(args[1], dtype=float), size=size)
    if kind is DistKind.UNIFORM:
        return rng.uniform(args[0], args[1], size=size)
    raise ValueError(f"cannot sample kind {kind}")


def logpdf(kind, args, x):
    """Elementwise log-density; -inf outside the support."""
    _check_params(kind, args)
    x = np.asarray(x, dtype=float)
    if kind is DistKind.GAUSSIAN:
        mean, sd = args
        z = (x - mean) / sd
        return -0.5 * z * z - np.log(sd) - _LOG_SQRT_2PI
    if kind is DistKind.TRUNCATED_GAUSSIAN:
        mean, sd, lower, upper = (np.asarray(a, dtype=float) for a in args)
        fa = ndtr((lower - mean) / sd)
        fb = ndtr((upper - mean) / sd)
        _require(fb - fa > 0, "truncated_gaussian truncation region has no mass")
        z = (x - mean) / sd
        core = -0.5 * z * z - np.log(sd) - _LOG_SQRT_2PI - np.log(fb - fa)
        return np.where((x >= lower) & (x <= upper), core, -np.inf)
    if kind is DistKind.GAMMA:
        shape, scale = (np.asarray(a, dtype=float) for a in args[:2])
        with np.errstate(divide="ignore", invalid="ignore"):
            core = (shape - 1.0) * np.log(x) - x / scale - shape * np.log(scale) - gammaln(shape)
        return np.where(x > 0, core, -np.inf)
    if kind is DistKind.INVERSE_GAMMA:
        shape, scale = (np.asarray(a, dtype=float) for a in args[:2])
        with np.errstate(divide="ignore", invalid="ignore"):
            core = shape * np.log(scale) - gammaln(shape) - (shape + 1.0) * np.log(x) - scale / x
        return np.where(x > 0, core, -np.inf)
    if kind is DistKind.UNIFORM:
        lower, upper = (np.asarray(a, dtype=float) for a in args)
        return np.where((x >= lower) & (x <= upper), -np.log(upper - lower), -np.inf)
    raise ValueError(f"cannot evaluate kind {kind}")
