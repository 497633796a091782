"""Run configuration (INI text) and the catalog of manufactured initial data."""

from __future__ import annotations

import configparser
import io
import math
import re
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import AnisoflowError, ConfigError
from .scalar_laws import PressureLaw
from .solver import SolverConfig
from .spectral import SpectralGrid
from .tensor4 import ViscosityTensor, from_table, parse_modulation, preset

INITIAL_PARAMS = {
    "equilibrium": (),
    "acoustic": (("k", int, 1), ("eps", float, 0.01)),
    "density_bump": (("eps", float, 0.1),),
    "shear": (("k", int, 1), ("eps", float, 0.01)),
    "random_bandlimited": (("seed", int, 0), ("kmax", int, 4), ("eps", float, 0.01)),
}


def parse_initial(text: str):
    """'acoustic(k=1, eps=0.01)', 'acoustic(1, 0.01)' or 'acoustic 1 0.01' -> (name, params)."""
    text = text.strip()
    m = re.fullmatch(r"(\w+)\s*(?:\((.*)\))?\s*(.*)", text, flags=re.S)
    if not m:
        raise ConfigError(f"cannot parse initial data {text!r}")
    name, inner, rest = m.group(1), m.group(2), m.group(3)
    if name not in INITIAL_PARAMS:
        raise ConfigError(f"unknown initial data {name!r}; choose from {sorted(INITIAL_PARAMS)}")
    if inner is not None and rest.strip():
        raise ConfigError(f"trailing text after initial data call: {rest!r}")
    raw = inner.split(",") if inner is not None else rest.split()
    raw = [r.strip() for r in raw if r.strip()]
    spec = INITIAL_PARAMS[name]
    params = {key: default for key, _, default in spec}
    types = {key: typ for key, typ, _ in spec}
    order = [key for key, _, _ in spec]
    if len(raw) > len(spec):
        raise ConfigError(f"{name} takes at most {len(spec)} arguments, got {len(raw)}")
    for pos, item in enumerate(raw):
        if "=" in item:
            key, val = (s.strip() for s in item.split("=", 1))
            if key not in types:
                raise ConfigError(f"{name} has no parameter {key!r}")
        else:
            key, val = order[pos], item
        try:
            params[key] = types[key](val)
        except ValueError:
            raise ConfigError(f"{name}: bad value {val!r} for {key}") from None
    return name, params


def format_initial(name: str, params: dict) -> str:
    args = ", ".join(f"{k}={params[k]!r}" for k, _, _ in INITIAL_PARAMS[name])
    return f"{name}({args})"


def initial_fields(grid: SpectralGrid, law: PressureLaw, name: str, params: dict):
    """(rho0, u0) for a catalog entry; rho0 has mean exactly M."""
    M = law.M
    x = grid.x
    d = grid.d
    rho = np.full(grid.shape, M)
    u = np.zeros((d,) + grid.shape)
    if name == "equilibrium":
        pass
    elif name == "acoustic":
        k, eps = params["k"], params["eps"]
        c = math.sqrt(law.a * law.gamma * M ** (law.gamma - 1))
        rho = M * (1 + eps * np.cos(k * x[0]))
        u[0] = c * eps * np.cos(k * x[0])
    elif name == "density_bump":
        eps = params["eps"]
        bump = np.exp(np.sum(np.cos(x), axis=0))
        rho = M * (1 - eps + eps * bump / grid.mean(bump))
    elif name == "shear":
        u[0] = params["eps"] * np.sin(params["k"] * x[1])
    elif name == "random_bandlimited":
        rng = np.random.default_rng(params["seed"])
        eps = params["eps"]
        rho = M * (1 + eps * grid.random_field(rng, params["kmax"]))
        u = grid.random_field(rng, params["kmax"], ncomp=d, amp=eps)
    else:
        raise ConfigError(f"unknown initial data {name!r}")
    rho = rho + (M - grid.mean(rho))
    if np.min(rho) < 0:
        raise ConfigError(f"initial density {name} is negative; reduce the amplitude")
    return rho, u


def _floats(text: str):
    return [float(v) for v in text.replace(",", " ").split()]


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "default"
    d: int = 2
    n: int = 64
    a: float = 1.0
    gamma: float = 2.0
    M: float = 1.0
    tensor_preset: str = "zero"
    tensor_table: tuple | None = None
    modulation: str = "const"
    mu: float = 1.0
    lam: float = 0.0
    delta: float = 0.1
    deltas: tuple = ()
    eta: float = 0.1
    c0: float | None = None
    C_tilde: float = 10.0
    initial: str = "equilibrium()"
    cfl: float = 0.5
    t_end: float = 1.0
    cadence: float = 0.1
    rho_floor: float = 1e-6
    seed: int = 0
    dealias: bool = True
    regularize: bool = True
    t0: float = 0.25
    output_dir: str = "out"

    # construction of the model objects

    def law(self) -> PressureLaw:
        law = PressureLaw(self.a, self.gamma, self.M)
        law.validate_dimension(self.d)
        return law

    def tensor(self) -> ViscosityTensor:
        if self.tensor_table is not None:
            core = from_table(self.tensor_table, self.d)
        else:
            core = preset(self.tensor_preset, self.d)
        return ViscosityTensor(self.mu, self.lam, core, parse_modulation(self.modulation))

    def solver_config(self, delta: float | None = None) -> SolverConfig:
        return SolverConfig(
            n=self.n, d=self.d, delta=self.delta if delta is None else delta, cfl=self.cfl, t_end=self.t_end,
            rho_floor=self.rho_floor, dealias=self.dealias, cadence=self.cadence, regularize=self.regularize,
        )

    def initial_spec(self):
        return parse_initial(self.initial)

    def validate(self) -> None:
        """Check every module precondition; raise ConfigError with context."""
        try:
            SpectralGrid(self.d, self.n)
            self.law()
            self.tensor()
            self.solver_config()
            parse_initial(self.initial)
        except ConfigError:
            raise
        except (AnisoflowError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if not self.mu > 0:
            raise ConfigError(f"[viscosity] mu must be > 0, got {self.mu}")
        if self.mu + self.lam < 0:
            raise ConfigError(f"[viscosity] mu + lambda must be >= 0, got {self.mu + self.lam}")
        if self.regularize and not self.delta < self.M:
            raise ConfigError(f"[mollifier] delta must be < M when regularizing, got {self.delta}")
        if not self.eta > 0:
            raise ConfigError(f"[monitor] eta must be > 0, got {self.eta}")
        if self.c0 is not None and not self.c0 > 0:
            raise ConfigError(f"[monitor] c0 must be > 0 or auto, got {self.c0}")
        if not self.C_tilde > 0:
            raise ConfigError(f"[monitor] C_tilde must be > 0, got {self.C_tilde}")
        if any(not dl > 0 for dl in self.deltas):
            raise ConfigError("[mollifier] deltas must all be > 0")
        if not 0 <= self.t0:
            raise ConfigError(f"[sweep] t0 must be >= 0, got {self.t0}")

    # text round trip

    def to_ini(self) -> str:
        sections = {
            "scenario": {"name": self.scenario},
            "grid": {"d": self.d, "n": self.n},
            "law": {"a": self.a, "gamma": self.gamma, "M": self.M},
            "tensor": {"modulation": self.modulation},
            "viscosity": {"mu": self.mu, "lambda": self.lam},
            "mollifier": {"delta": self.delta},
            "monitor": {"eta": self.eta, "c0": "auto" if self.c0 is None else self.c0, "C_tilde": self.C_tilde},
            "initial": {"spec": format_initial(*self.initial_spec())},
            "solver": {
                "cfl": self.cfl, "t_end": self.t_end, "cadence": self.cadence, "rho_floor": self.rho_floor,
                "seed": self.seed, "dealias": self.dealias, "regularize": self.regularize,
            },
            "sweep": {"t0": self.t0},
            "output": {"dir": self.output_dir},
        }
        if self.tensor_table is not None:
            sections["tensor"]["table"] = " ".join(repr(float(v)) for v in self.tensor_table)
        else:
            sections["tensor"]["preset"] = self.tensor_preset
        if self.deltas:
            sections["mollifier"]["deltas"] = " ".join(repr(float(v)) for v in self.deltas)
        buf = io.StringIO()
        buf.write("# viscosities and densities in the dimensionless units of the pressure law\n")
        for sec, kv in sections.items():
            buf.write(f"[{sec}]\n")
            for k, v in kv.items():
                buf.write(f"{k} = {_fmt(v)}\n")
            buf.write("\n")
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str, source: str = "<config>") -> RunConfig:
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
        kw = {}
        known = {
            "scenario": {"name": ("scenario", str)},
            "grid": {"d": ("d", int), "n": ("n", int)},
            "law": {"a": ("a", float), "gamma": ("gamma", float), "M": ("M", float)},
            "tensor": {"preset": ("tensor_preset", str), "table": ("tensor_table", lambda s: tuple(_floats(s))),
                       "modulation": ("modulation", str)},
            "viscosity": {"mu": ("mu", float), "lambda": ("lam", float)},
            "mollifier": {"delta": ("delta", float), "deltas": ("deltas", lambda s: tuple(_floats(s)))},
            "monitor": {"eta": ("eta", float), "c0": ("c0", lambda s: None if s.strip() == "auto" else float(s)),
                        "C_tilde": ("C_tilde", float)},
            "initial": {"spec": ("initial", str)},
            "solver": {"cfl": ("cfl", float), "t_end": ("t_end", float), "cadence": ("cadence", float),
                       "rho_floor": ("rho_floor", float), "seed": ("seed", int), "dealias": ("dealias", _bool),
                       "regularize": ("regularize", _bool)},
            "sweep": {"t0": ("t0", float)},
            "output": {"dir": ("output_dir", str)},
        }
        for sec in cp.sections():
            if sec not in known:
                raise ConfigError(f"{source}: unknown section [{sec}]")
            for key, raw in cp.items(sec):
                if key not in known[sec]:
                    raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]")
                name, conv = known[sec][key]
                try:
                    kw[name] = conv(raw)
                except (ValueError, ConfigError) as exc:
                    raise ConfigError(f"{source}: [{sec}] {key} = {raw!r}: {exc}") from None
        if "tensor_table" in kw and "tensor_preset" in kw:
            raise ConfigError(f"{source}: [tensor] takes either preset or table, not both")
        if "initial" in kw:
            kw["initial"] = format_initial(*parse_initial(kw["initial"]))
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_ini(text, source=str(path))

    def with_(self, **kw) -> RunConfig:
        return replace(self, **kw)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")
