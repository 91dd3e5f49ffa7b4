"""Experiment configuration: a YAML tree validated against dataclass sections.

Unknown keys are rejected and missing required fields are reported with
their dotted path (``system.eps``).
"""

from __future__ import annotations

from dataclasses import MISSING, asdict, dataclass, field, fields
import math
from typing import Any, Optional

import yaml

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class SystemSection:
    eps: float
    a: float
    beta: list
    mu: Optional[float] = None          # None: mu_c * min(eps^{3/2}, eps^{2a+1})
    mu_c: float = 0.01
    normalize_beta: bool = True
    delta0: float = 0.05


@dataclass
class PerturbationSection:
    preset: Optional[str] = "cosine-sum"
    terms: Optional[list] = None        # [[k...], a_k, b_k]: a_k cos(k.phi) + b_k sin(k.phi)
    widths: Optional[list] = None


@dataclass
class SolverSection:
    t_radius: float = 16.0
    nodes_per_unit: int = 24
    degree: int = 24
    newton_tol: float = 1e-13
    newton_max_iter: int = 25
    min_gap: float = 10.0
    split_gap: float = 48.0


@dataclass
class ConditionSection:
    a1_n: int = 48
    x_n: int = 9
    M: int = 8
    rho: Optional[float] = None
    sigma: Optional[float] = None
    delta1: Optional[float] = None
    delta2: Optional[float] = None
    delta3: Optional[float] = None
    l1: float = -2 * math.pi
    l2: float = 2 * math.pi
    profile: bool = False


@dataclass
class SimulateSection:
    phi0: Optional[list] = None
    I0: Optional[list] = None
    q0: float = 1e-3
    p0: float = 1e-3
    t_span: list = field(default_factory=lambda: [0.0, 20.0])
    tol: float = 1e-11
    n_samples: int = 2001


@dataclass
class HomoclinicSection:
    variant: str = "pi"                 # pi | psi | k-bump
    A: Optional[list] = None
    theta: float = 0.0
    thetas: list = field(default_factory=lambda: [0.0, 20.0])


@dataclass
class SplittingSection:
    A2: list = field(default_factory=lambda: [0.0, 1.5707963267948966, 3.141592653589793])
    M: int = 32


@dataclass
class MelnikovSection:
    omegas: list = field(default_factory=lambda: [0.01, 0.1, 1.0, 5.0, 5.0])
    A: float = 0.0
    closed_form: bool = True
    t_max: float = 40.0


@dataclass
class ErgodizeSection:
    flow: str = "omega1"                # omega1 (splitting basis) | omega
    sigma: Optional[float] = None       # None: rho/6
    tau: float = 2.0
    K_max: int = 60
    probe_m: int = 9
    k: int = 5
    min_gap: float = 100.0


@dataclass
class ChainSection:
    dI: Optional[float] = None          # None: chosen from k_target
    k_target: int = 10
    eta: float = 1e-3
    direction: str = "omega3"           # omega3 | I1
    tau: float = 2.0
    K_max: int = 60
    probe_m: int = 9
    grad_tol: float = 1e-7
    reintegrate: bool = True
    k_cap: int = 200


@dataclass
class SweepSection:
    eps: list = field(default_factory=lambda: [0.025, 0.02, 0.015, 0.01])
    mu_c: float = 0.01
    mu_exponent: Optional[float] = None
    tau: float = 2.0
    K_max: int = 60
    dI: Optional[float] = None          # None: k = k_first at the largest eps
    k_first: int = 5
    eta: float = 1e-3
    gamma_floor: float = 0.05


@dataclass
class OutputSection:
    dir: str = "out"
    formats: list = field(default_factory=lambda: ["json", "csv"])


SECTIONS = dict(system=SystemSection, perturbation=PerturbationSection, solver=SolverSection,
                condition=ConditionSection, simulate=SimulateSection,
                homoclinic=HomoclinicSection, splitting=SplittingSection,
                melnikov=MelnikovSection, ergodize=ErgodizeSection, chain=ChainSection,
                sweep=SweepSection, output=OutputSection)
REQUIRED = ("schema", "system")


@dataclass
class ExperimentConfig:
    schema: int
    system: SystemSection
    perturbation: PerturbationSection = field(default_factory=PerturbationSection)
    solver: SolverSection = field(default_factory=SolverSection)
    condition: ConditionSection = field(default_factory=ConditionSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    homoclinic: HomoclinicSection = field(default_factory=HomoclinicSection)
    splitting: SplittingSection = field(default_factory=SplittingSection)
    melnikov: MelnikovSection = field(default_factory=MelnikovSection)
    ergodize: ErgodizeSection = field(default_factory=ErgodizeSection)
    chain: ChainSection = field(default_factory=ChainSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    output: OutputSection = field(default_factory=OutputSection)

    def to_dict(self) -> dict:
        return asdict(self)


_SCALARS = {"float": float, "int": int, "bool": bool, "str": str, "list": list}


def _coerce(value: Any, tp: str, path: str):
    opt = tp.startswith("Optional[")
    base = tp[9:-1] if opt else tp
    if value is None:
        if opt:
            return None
        raise ConfigError(path, "must not be null")
    want = _SCALARS.get(base)
    if want is None:
        return value
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if not isinstance(value, want):
        raise ConfigError(path, f"expected {base}, got {value!r}")
    return value


def _section(cls, data, path: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path, "expected a mapping")
    names = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{path}.{key}", "unknown key")
    kw = {}
    for name, f in names.items():
        p = f"{path}.{name}"
        if name in data:
            kw[name] = _coerce(data[name], str(f.type), p)
        elif f.default is MISSING and f.default_factory is MISSING:
            raise ConfigError(p, "missing required field")
    return cls(**kw)


def parse_config(data) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    for key in data:
        if key not in SECTIONS and key != "schema":
            raise ConfigError(key, "unknown key")
    for key in REQUIRED:
        if key not in data:
            raise ConfigError(key, "missing required field")
    if data["schema"] != SCHEMA_VERSION:
        raise ConfigError("schema", f"unsupported version {data['schema']!r} (expected {SCHEMA_VERSION})")
    kw = {"schema": SCHEMA_VERSION}
    for name, cls in SECTIONS.items():
        raw = data.get(name)
        if name == "perturbation" and isinstance(raw, str):
            raw = {"preset": raw}
        kw[name] = _section(cls, raw, name)
    cfg = ExperimentConfig(**kw)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    s = cfg.system
    if not s.eps > 0:
        raise ConfigError("system.eps", "must be positive")
    if not s.a > 0:
        raise ConfigError("system.a", "must be positive")
    if len(s.beta) < 2:
        raise ConfigError("system.beta", "needs length n-1 >= 2")
    p = cfg.perturbation
    if p.preset is not None and p.preset != "cosine-sum":
        raise ConfigError("perturbation.preset", f"unknown preset {p.preset!r}")
    if p.preset is None and p.terms is None:
        raise ConfigError("perturbation.terms", "missing required field (no preset given)")
    if cfg.homoclinic.variant not in ("pi", "psi", "k-bump"):
        raise ConfigError("homoclinic.variant", "must be pi, psi or k-bump")
    if cfg.ergodize.flow not in ("omega1", "omega"):
        raise ConfigError("ergodize.flow", "must be omega1 or omega")
    if cfg.chain.direction not in ("omega3", "I1"):
        raise ConfigError("chain.direction", "must be omega3 or I1")
    for fmt in cfg.output.formats:
        if fmt not in ("json", "csv"):
            raise ConfigError("output.formats", f"unknown format {fmt!r}")


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(str(path), f"not valid YAML: {exc}") from exc
    return parse_config(data)


# -- builders -------------------------------------------------------------------

def system_params(cfg: ExperimentConfig):
    from .shadowing import default_mu
    from .system import SystemParams
    s = cfg.system
    mu = s.mu if s.mu is not None else default_mu(s.eps, s.a, s.mu_c)
    return SystemParams(eps=s.eps, a=s.a, beta=tuple(float(b) for b in s.beta), mu=mu,
                        normalize_beta=s.normalize_beta, delta0=s.delta0)


def perturbation(cfg: ExperimentConfig):
    from .system import TrigPerturbation
    n = len(cfg.system.beta) + 1
    p = cfg.perturbation
    if p.terms is not None:
        return TrigPerturbation.from_real_terms(p.terms, n, widths=p.widths)
    return TrigPerturbation.cosine_sum(n, widths=p.widths)


def bvp_settings(cfg: ExperimentConfig):
    from .homoclinic import BvpSettings
    return BvpSettings(**asdict(cfg.solver))
