"""Run configuration: schema, parser, and validated construction.

Config files are flat UTF-8 `key = value` documents; `#` starts a comment
and blank lines are ignored.  Lists are comma-separated.  Booleans accept
on/off or true/false.  Every parse error reports the offending line and
field; every constraint violation names the field and the rule.
"""

import dataclasses
from dataclasses import dataclass

from .noise import GammaFamily, GaussianMarks, JumpSpec, QSpectrum, SigmaFamily, UniformMarks
from .operators import OperatorConfig
from .presets import direction_field, initial_field


class ConfigError(ValueError):
    """Invalid configuration; carries the offending field and line."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"{field}: "
        super().__init__(prefix + message)


class RegimeError(ConfigError):
    """Parameters outside the covered uniqueness regime."""


@dataclass
class RunConfig:
    """All knobs of a run; every field has a validated default."""

    d: int = 2
    n: int = 8
    r: float = 3.0
    mu: float = 1.0
    beta: float = 1.0
    T: float = 1.0
    dt: float = 0.01
    output_times: tuple = ()
    init: str = "taylor-green"
    init_amplitude: float = 1.0
    scheme: str = "tamed-explicit"
    taming: bool = True
    guard_factor: float = 1e6
    seed: int = 0
    ensemble: int = 1000
    dealias: str = "padded-collocation"
    convection: bool = True
    # Wiener noise
    sigma_kind: str = "off"
    sigma_a0: float = 1.0
    sigma_decay: float = 0.0
    sigma_rho: float = 0.5
    q_c: float = 0.1
    q_s: float = 2.0
    # jump noise
    jump_intensity: float = 0.0
    mark_law: str = "uniform"
    mark_lo: float = -1.0
    mark_hi: float = 1.0
    mark_mean: float = 0.0
    mark_std: float = 1.0
    gamma_c0: float = 1.0
    gamma_c1: float = 0.0
    jump_direction: str = "lowest"
    # statistical / scheme tolerances
    tol_identity: float = 1e-10
    tol_exact: float = 1e-12
    tol_scheme: float = 0.05
    stat_sigmas: float = 3.0

    def operator_config(self):
        return OperatorConfig(r=self.r, mu=self.mu, beta=self.beta, dealias=self.dealias)

    def qspectrum(self):
        return QSpectrum(c=self.q_c, s=self.q_s)

    def sigma_family(self):
        if self.sigma_kind == "off" or self.sigma_a0 == 0.0:
            return None
        rho = self.sigma_rho if self.sigma_kind == "bounded-multiplicative" else 0.0
        return SigmaFamily(kind=self.sigma_kind, a0=self.sigma_a0,
                           decay=self.sigma_decay, rho=rho)

    def jump_spec(self):
        if self.mark_law == "uniform":
            marks = UniformMarks(self.mark_lo, self.mark_hi)
        else:
            marks = GaussianMarks(self.mark_mean, self.mark_std)
        return JumpSpec(intensity=self.jump_intensity, marks=marks)

    def gamma_family(self, basis):
        if self.jump_intensity == 0.0:
            return None
        return GammaFamily(c0=self.gamma_c0, c1=self.gamma_c1,
                           direction=direction_field(self.jump_direction, basis),
                           spec=self.jump_spec())

    def initial(self, basis):
        return initial_field(self.init, basis, self.init_amplitude)

    def outputs(self):
        return tuple(self.output_times) if self.output_times else (0.0, self.T)


_BOOL_WORDS = {"on": True, "true": True, "yes": True,
               "off": False, "false": False, "no": False}

_CHOICES = {
    "scheme": ("tamed-explicit", "exponential-tamed"),
    "dealias": ("padded-collocation", "exact-convolution"),
    "sigma_kind": ("off", "additive", "bounded-multiplicative"),
    "mark_law": ("uniform", "gaussian"),
}


def _coerce(field, raw, line):
    kind = RunConfig.__dataclass_fields__[field].type
    name = kind if isinstance(kind, str) else kind.__name__
    try:
        if name == "int":
            return int(raw)
        if name == "float":
            return float(raw)
        if name == "bool":
            if raw.lower() not in _BOOL_WORDS:
                raise ValueError
            return _BOOL_WORDS[raw.lower()]
        if name == "tuple":
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r} as {name}", field=field, line=line) from None


def _check(cond, field, rule):
    if not cond:
        raise ConfigError(f"must satisfy {rule}", field=field)


def validate(cfg, uniqueness=False):
    """Constraint checks; raises ConfigError naming the field and rule."""
    _check(cfg.d in (2, 3), "d", "d in {2, 3}")
    _check(cfg.n >= 1, "n", "n >= 1")
    _check(cfg.r >= 1, "r", "r >= 1")
    _check(cfg.mu > 0, "mu", "mu > 0")
    _check(cfg.beta >= 0, "beta", "beta >= 0")
    _check(cfg.T >= 0, "T", "T >= 0")
    _check(cfg.dt > 0, "dt", "dt > 0")
    _check(all(0 <= t <= cfg.T for t in cfg.output_times),
           "output_times", "0 <= t <= T")
    _check(tuple(cfg.output_times) == tuple(sorted(cfg.output_times)),
           "output_times", "monotone increasing")
    _check(cfg.init_amplitude >= 0, "init_amplitude", "init_amplitude >= 0")
    _check(cfg.scheme in _CHOICES["scheme"], "scheme", f"one of {_CHOICES['scheme']}")
    _check(cfg.guard_factor > 0, "guard_factor", "guard_factor > 0")
    _check(cfg.ensemble >= 1, "ensemble", "ensemble >= 1")
    _check(cfg.sigma_kind in _CHOICES["sigma_kind"], "sigma_kind",
           f"one of {_CHOICES['sigma_kind']}")
    _check(cfg.q_c > 0, "q_c", "q_c > 0")
    _check(2 * cfg.q_s > cfg.d, "q_s", "2 q_s > d (trace-class spectrum)")
    _check(cfg.sigma_rho >= 0, "sigma_rho", "sigma_rho >= 0")
    _check(cfg.jump_intensity >= 0, "jump_intensity", "jump_intensity >= 0")
    _check(cfg.mark_law in _CHOICES["mark_law"], "mark_law",
           f"one of {_CHOICES['mark_law']}")
    if cfg.mark_law == "uniform":
        _check(cfg.mark_hi > cfg.mark_lo, "mark_hi", "mark_hi > mark_lo")
    else:
        _check(cfg.mark_std > 0, "mark_std", "mark_std > 0")
    _check(cfg.gamma_c0 >= 0, "gamma_c0", "gamma_c0 >= 0")
    _check(cfg.gamma_c1 >= 0, "gamma_c1", "gamma_c1 >= 0")
    _check(cfg.dealias in _CHOICES["dealias"], "dealias", f"one of {_CHOICES['dealias']}")
    if uniqueness:
        ok, reason = uniqueness_regime(cfg.d, cfg.r, cfg.mu, cfg.beta)
        if not ok:
            raise RegimeError(reason, field="r")
    return cfg


def uniqueness_regime(d, r, mu, beta):
    """Covered pathwise-uniqueness regimes and the reason when refused."""
    if d == 2:
        return True, ""
    if r > 3:
        return True, ""
    if r == 3:
        if 2 * beta * mu >= 1:
            return True, ""
        return False, (f"uniqueness for d=3, r=3 requires 2 beta mu >= 1 "
                       f"(got 2*{beta}*{mu} = {2 * beta * mu})")
    return False, f"uniqueness is not covered for d=3 with r={r} < 3"


def parse_config(text, uniqueness=False):
    """Parse a key = value document into a validated RunConfig."""
    values = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected `key = value`", line=lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in RunConfig.__dataclass_fields__:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in values:
            raise ConfigError("duplicate key", field=key, line=lineno)
        values[key] = _coerce(key, raw, lineno)
    return validate(RunConfig(**values), uniqueness=uniqueness)


def config_to_dict(cfg):
    """Plain-JSON echo of every field (the manifest records this)."""
    out = dataclasses.asdict(cfg)
    out["output_times"] = list(out["output_times"])
    return out


def replace(cfg, **kwargs):
    return dataclasses.replace(cfg, **kwargs)
