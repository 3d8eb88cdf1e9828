"""Command-line configuration for the `sample` tool.

Tokens are `--key value`, `--flag`, or `@path`; an `@path` token splices
the file's whitespace-separated tokens in place (lines starting with `#`
are comments), recursively, with cycle detection. Later keys override
earlier ones, so a command-line option can override a config-file value.
"""

import os
from dataclasses import dataclass, field

from .errors import ConfigError

TARGETS = ("joint", "prior", "posterior", "prediction")
FILTERS = ("kalman", "bootstrap")
SAMPLERS = ("mh", "smc2")
RESAMPLERS = ("multinomial", "stratified", "systematic")

# options kept for compatibility with configurations written for
# hardware-accelerated builds; reported as unsupported and ignored
_UNSUPPORTED_FLAGS = ("enable-cuda", "enable-mpi", "enable-sse")
_UNSUPPORTED_VALUED = ("mpi-np",)


@dataclass
class RunConfig:
    model_file: str = None
    target: str = None
    filter: str = "bootstrap"
    sampler: str = "mh"
    nsamples: int = None
    nparticles: int = 1024
    noutputs: int = None
    start_time: float = 0.0
    end_time: float = None
    input_file: str = None
    obs_file: str = None
    init_file: str = None
    output_file: str = None
    seed: int = 0
    nthreads: int = 1
    resampler: str = "multinomial"
    ess_rel: float = None
    disable_assert: bool = False
    unsupported: list = field(default_factory=list)

    def echo(self):
        """Canonical one-line rendering of the resolved configuration."""
        parts = []
        for key, attr in _OPTIONS:
            value = getattr(self, attr)
            if value is None:
                continue
            if attr == "disable_assert":
                if value:
                    parts.append(f"--{key}")
                continue
            parts.append(f"--{key} {value}")
        return " ".join(parts)


_OPTIONS = [
    ("model-file", "model_file"),
    ("target", "target"),
    ("filter", "filter"),
    ("sampler", "sampler"),
    ("nsamples", "nsamples"),
    ("nparticles", "nparticles"),
    ("noutputs", "noutputs"),
    ("start-time", "start_time"),
    ("end-time", "end_time"),
    ("input-file", "input_file"),
    ("obs-file", "obs_file"),
    ("init-file", "init_file"),
    ("output-file", "output_file"),
    ("seed", "seed"),
    ("nthreads", "nthreads"),
    ("resampler", "resampler"),
    ("ess-rel", "ess_rel"),
]
_KEY_TO_ATTR = dict(_OPTIONS)

_INT_KEYS = {"nsamples", "nparticles", "noutputs", "seed", "nthreads"}
_FLOAT_KEYS = {"start-time", "end-time", "ess-rel"}
_CHOICES = {
    "target": TARGETS,
    "filter": FILTERS,
    "sampler": SAMPLERS,
    "resampler": RESAMPLERS,
}


def _splice(tokens, seen):
    out = []
    for tok in tokens:
        if tok.startswith("@"):
            path = os.path.abspath(tok[1:])
            if path in seen:
                raise ConfigError(f"cyclic @-inclusion of {tok[1:]!r}")
            try:
                with open(path, "r", encoding="utf-8") as fh:
                    raw = fh.read()
            except OSError as e:
                raise ConfigError(f"cannot read config file {tok[1:]!r}: {e}") from None
            inner = []
            for line in raw.splitlines():
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                inner.extend(line.split())
            out.extend(_splice(inner, seen | {path}))
        else:
            out.append(tok)
    return out


def parse_config(argv):
    """Resolve argv (with @file splicing, last key wins) into a RunConfig."""
    tokens = _splice(list(argv), frozenset())
    cfg = RunConfig()
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected token {tok!r} (options are --key value or @file)")
        key = tok[2:]
        if key == "disable-assert":
            cfg.disable_assert = True
            i += 1
            continue
        if key in _UNSUPPORTED_FLAGS:
            cfg.unsupported.append(key)
            i += 1
            continue
        if key in _UNSUPPORTED_VALUED:
            cfg.unsupported.append(key)
            i += 2
            continue
        attr = _KEY_TO_ATTR.get(key)
        if attr is None:
            raise ConfigError(f"unknown option --{key}")
        if i + 1 >= len(tokens):
            raise ConfigError(f"option --{key} needs a value")
        value = tokens[i + 1]
        i += 2
        try:
            if key in _INT_KEYS:
                value = int(value)
            elif key in _FLOAT_KEYS:
                value = float(value)
        except ValueError:
            raise ConfigError(f"option --{key} needs a number, got {value!r}") from None
        if key in _CHOICES and value not in _CHOICES[key]:
            raise ConfigError(f"option --{key} must be one of {', '.join(_CHOICES[key])}")
        setattr(cfg, attr, value)

    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if cfg.model_file is None:
        raise ConfigError("model file required (--model-file)")
    if cfg.target is None:
        raise ConfigError("target required (--target joint|prior|posterior|prediction)")
    if cfg.end_time is None:
        raise ConfigError("end time required (--end-time)")
    if cfg.noutputs is None:
        raise ConfigError("number of outputs required (--noutputs)")
    if cfg.output_file is None:
        raise ConfigError("output file required (--output-file)")
    if cfg.target in ("joint", "prior", "posterior") and cfg.nsamples is None:
        raise ConfigError(f"--nsamples required for target {cfg.target}")
    if cfg.target == "posterior" and cfg.obs_file is None:
        raise ConfigError("posterior target requires --obs-file")
    if cfg.target == "prediction" and cfg.init_file is None:
        raise ConfigError("prediction target requires --init-file")
    if cfg.end_time <= cfg.start_time:
        raise ConfigError("--end-time must be after --start-time")
    if cfg.nsamples is not None and cfg.nsamples < 0:
        raise ConfigError("--nsamples must be >= 0")
    if cfg.nparticles < 2:
        raise ConfigError("--nparticles must be >= 2")
    if cfg.noutputs < 1:
        raise ConfigError("--noutputs must be >= 1")
    if cfg.nthreads < 1:
        raise ConfigError("--nthreads must be >= 1")
    if cfg.ess_rel is not None and not 0 < cfg.ess_rel <= 1:
        raise ConfigError("--ess-rel must be in (0, 1]")
