"""Run configuration: JSON parsing, validation with key paths, ``--set`` overrides,
forcing and initial-state builders."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .operators import leray_coeffs
from .spectral import Grid, SpectralVectorField, dealias_mask, forward, make_grid, sobolev_norm

COMMANDS = ("solve", "verify", "liouville", "sweep")
FORCING_KINDS = ("zero", "single_mode", "gaussian_bump", "snapshot_file")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass
class GridConfig:
    n: int = 32
    L: float = 8.0


@dataclass
class ParamsConfig:
    epsilon: float = 0.5
    R_cut: float = 2.0
    kappa: float = 100.0
    lam: float = 1.0
    damping: float = 0.5
    max_iters: int = 200
    tol: float = 1e-10
    scheme: str = "linear_implicit"
    inner_rtol: float = 1e-3


@dataclass
class ForcingConfig:
    kind: str = "zero"
    target: str = "f"
    mode: list[int] | None = None
    center: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    width: float = 1.0
    polarization: list[float] | None = None
    amplitude: float | None = None
    hm1_norm: float | None = None
    path: str | None = None


@dataclass
class RunConfig:
    command: str = "solve"
    output_dir: str = "out"
    seed: int = 0
    init: str = "zero"
    init_norm: float = 1e-3
    snapshot: str | None = None
    diagnostics: bool = True


@dataclass
class LiouvilleConfig:
    R_list: list[float] = field(default_factory=lambda: [1.0, 2.0, 4.0])
    q: float = 3.0
    source: str = "snapshot"
    width: float = 1.5
    refine: int = 2


@dataclass
class SweepConfig:
    epsilons: list[float] = field(default_factory=lambda: [0.5, 0.25, 0.125])
    radii: list[float] = field(default_factory=lambda: [2.0])
    lambdas: list[float] = field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])


@dataclass
class Config:
    grid: GridConfig = field(default_factory=GridConfig)
    params: ParamsConfig = field(default_factory=ParamsConfig)
    forcing: ForcingConfig = field(default_factory=ForcingConfig)
    run: RunConfig = field(default_factory=RunConfig)
    liouville: LiouvilleConfig = field(default_factory=LiouvilleConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"]["lambda"] = d["params"].pop("lam")
        return d

    def make_grid(self) -> Grid:
        return make_grid(self.grid.n, self.grid.L)


# JSON key -> dataclass attribute
_ALIASES = {"params": {"lambda": "lam"}}
_SECTIONS = {f.name: f.default_factory for f in fields(Config)}  # type: ignore[misc]


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(path, message)


def _number(value: Any, path: str) -> float:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), path, f"expected a number, got {value!r}")
    _require(math.isfinite(value), path, "must be finite")
    return float(value)


def _integer(value: Any, path: str) -> int:
    ok = isinstance(value, int) and not isinstance(value, bool)
    ok = ok or (isinstance(value, float) and value.is_integer())
    _require(ok, path, f"expected an integer, got {value!r}")
    return int(value)


def _vector(value: Any, path: str, cast) -> list:
    _require(isinstance(value, list) and len(value) == 3, path, "expected a list of 3 numbers")
    return [cast(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _float_list(value: Any, path: str) -> list[float]:
    _require(isinstance(value, list) and len(value) > 0, path, "expected a nonempty list of numbers")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _fill(section: str, raw: Any):
    _require(isinstance(raw, dict), section, "expected an object")
    obj = _SECTIONS[section]()
    aliases = _ALIASES.get(section, {})
    names = {f.name for f in fields(obj)}
    for key, value in raw.items():
        attr = aliases.get(key, key)
        if attr not in names or (attr != key and key not in aliases) or (attr == key and attr in aliases.values()):
            raise ConfigError(f"{section}.{key}", "unknown key")
        setattr(obj, attr, value)
    return obj


def _validate(cfg: Config, present: dict) -> None:
    g = cfg.grid
    g.n = _integer(g.n, "grid.n")
    _require(g.n >= 8 and g.n % 2 == 0, "grid.n", f"n must be even and >= 8, got {g.n}")
    g.L = _number(g.L, "grid.L")
    _require(g.L > 0, "grid.L", f"L must be positive, got {g.L}")

    p = cfg.params
    p.epsilon = _number(p.epsilon, "params.epsilon")
    _require(0 < p.epsilon <= 1, "params.epsilon", "epsilon must be in (0,1]")
    p.R_cut = _number(p.R_cut, "params.R_cut")
    _require(p.R_cut >= 1, "params.R_cut", "R_cut must be >= 1")
    _require(2 * p.R_cut <= math.pi * g.L, "params.R_cut", f"2 R_cut must not exceed pi L = {math.pi * g.L:.6g}")
    p.kappa = _number(p.kappa, "params.kappa")
    _require(p.kappa >= 1, "params.kappa", "kappa must be >= 1")
    p.lam = _number(p.lam, "params.lambda")
    _require(0 <= p.lam <= 1, "params.lambda", "lambda must be in [0,1]")
    p.damping = _number(p.damping, "params.damping")
    _require(0 < p.damping <= 1, "params.damping", "damping must be in (0,1]")
    p.max_iters = _integer(p.max_iters, "params.max_iters")
    _require(p.max_iters >= 1, "params.max_iters", "max_iters must be positive")
    p.tol = _number(p.tol, "params.tol")
    _require(p.tol > 0, "params.tol", "tol must be positive")
    _require(p.scheme in ("linear_implicit", "plain"), "params.scheme", "scheme must be 'linear_implicit' or 'plain'")
    p.inner_rtol = _number(p.inner_rtol, "params.inner_rtol")
    _require(0 < p.inner_rtol < 1, "params.inner_rtol", "inner_rtol must be in (0,1)")

    fc = cfg.forcing
    _require(fc.kind in FORCING_KINDS, "forcing.kind", f"kind must be one of {', '.join(FORCING_KINDS)}")
    _require(fc.target in ("f", "g", "both"), "forcing.target", "target must be 'f', 'g' or 'both'")
    given = present.get("forcing", {})
    if fc.kind == "single_mode":
        _require("mode" in given, "forcing.mode", "missing key 'mode' (integer mode index) for kind single_mode")
        fc.mode = _vector(fc.mode, "forcing.mode", _integer)
        _require(any(fc.mode), "forcing.mode", "mode index must be nonzero")
        band = g.n // 3
        _require(all(abs(k) <= band for k in fc.mode), "forcing.mode", f"mode index outside the dealiased band |k_i| <= {band}")
    if fc.kind == "gaussian_bump":
        fc.center = _vector(fc.center, "forcing.center", _number)
        fc.width = _number(fc.width, "forcing.width")
        _require(fc.width > 0, "forcing.width", "width must be positive")
    if fc.kind in ("single_mode", "gaussian_bump"):
        if fc.polarization is not None:
            fc.polarization = _vector(fc.polarization, "forcing.polarization", _number)
        _require(
            fc.amplitude is None or fc.hm1_norm is None, "forcing.amplitude", "give either amplitude or hm1_norm, not both"
        )
        for key in ("amplitude", "hm1_norm"):
            if getattr(fc, key) is not None:
                setattr(fc, key, _number(getattr(fc, key), f"forcing.{key}"))
                _require(getattr(fc, key) >= 0, f"forcing.{key}", f"{key} must be nonnegative")
        if fc.amplitude is None and fc.hm1_norm is None:
            fc.amplitude = 1.0
    if fc.kind == "snapshot_file":
        _require(isinstance(fc.path, str), "forcing.path", "missing key 'path' for kind snapshot_file")
        _require(Path(fc.path).is_file(), "forcing.path", f"file not found: {fc.path}")

    r = cfg.run
    _require(r.command in COMMANDS, "run.command", f"command must be one of {', '.join(COMMANDS)}")
    _require(isinstance(r.output_dir, str) and r.output_dir != "", "run.output_dir", "expected a nonempty string")
    r.seed = _integer(r.seed, "run.seed")
    _require(0 <= r.seed < 2**64, "run.seed", "seed must be a 64-bit unsigned integer")
    _require(r.init in ("zero", "random", "snapshot"), "run.init", "init must be 'zero', 'random' or 'snapshot'")
    r.init_norm = _number(r.init_norm, "run.init_norm")
    _require(r.init_norm >= 0, "run.init_norm", "init_norm must be nonnegative")
    _require(isinstance(r.diagnostics, bool), "run.diagnostics", "expected true or false")
    if r.snapshot is not None:
        _require(isinstance(r.snapshot, str), "run.snapshot", "expected a path string")
        _require(Path(r.snapshot).is_file(), "run.snapshot", f"file not found: {r.snapshot}")
    needs_snapshot = r.init == "snapshot" or r.command == "verify"
    needs_snapshot = needs_snapshot or (r.command == "liouville" and cfg.liouville.source == "snapshot")
    _require(not needs_snapshot or r.snapshot is not None, "run.snapshot", f"command {r.command!r} needs a snapshot path")

    lv = cfg.liouville
    lv.R_list = _float_list(lv.R_list, "liouville.R_list")
    for i, R in enumerate(lv.R_list):
        _require(R >= 1, f"liouville.R_list[{i}]", "radii must be >= 1")
        _require(2 * R <= math.pi * g.L, f"liouville.R_list[{i}]", "annulus exceeds the box (need 2R <= pi L)")
    lv.q = _number(lv.q, "liouville.q")
    _require(3 <= lv.q <= 4.5, "liouville.q", "q must be in [3, 4.5]")
    _require(lv.source in ("snapshot", "gaussian"), "liouville.source", "source must be 'snapshot' or 'gaussian'")
    lv.width = _number(lv.width, "liouville.width")
    _require(lv.width > 0, "liouville.width", "width must be positive")
    lv.refine = _integer(lv.refine, "liouville.refine")
    _require(lv.refine >= 1, "liouville.refine", "refine must be >= 1")

    sw = cfg.sweep
    sw.epsilons = _float_list(sw.epsilons, "sweep.epsilons")
    _require(sw.epsilons == sorted(sw.epsilons, reverse=True), "sweep.epsilons", "must be descending")
    _require(all(0 < e <= 1 for e in sw.epsilons), "sweep.epsilons", "epsilon must be in (0,1]")
    sw.radii = _float_list(sw.radii, "sweep.radii")
    _require(sw.radii == sorted(sw.radii), "sweep.radii", "must be ascending")
    _require(all(R >= 1 and 2 * R <= math.pi * g.L for R in sw.radii), "sweep.radii", "need 1 <= R and 2R <= pi L")
    sw.lambdas = _float_list(sw.lambdas, "sweep.lambdas")
    _require(all(0 <= v <= 1 for v in sw.lambdas), "sweep.lambdas", "lambda must be in [0,1]")


def _from_raw(raw: Any) -> Config:
    _require(isinstance(raw, dict), "", "config must be a JSON object")
    cfg = Config()
    for key, value in raw.items():
        if key not in _SECTIONS:
            raise ConfigError(key, "unknown key")
        setattr(cfg, key, _fill(key, value))
    _validate(cfg, raw)
    return cfg


def parse_config(text: str, overrides: list[str] | None = None) -> Config:
    """Parse and validate a JSON config; ``overrides`` are ``section.key=value`` strings."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from exc
    raw = apply_overrides(raw, overrides or [])
    return _from_raw(raw)


def load_config(path: str | Path, overrides: list[str] | None = None) -> Config:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("", f"config file not found: {p}")
    return parse_config(p.read_text(encoding="utf-8"), overrides)


def apply_overrides(raw: Any, overrides: list[str]) -> Any:
    """Apply ``a.b=value`` assignments; values are parsed as JSON, else kept as strings."""
    out = copy.deepcopy(raw) if isinstance(raw, dict) else raw
    for item in overrides:
        key, sep, text = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError("", f"--set expects key=value, got {item!r}")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        parts = key.split(".")
        if len(parts) != 2:
            raise ConfigError(key, "--set keys have the form section.key")
        if not isinstance(out, dict):
            raise ConfigError("", "config must be a JSON object")
        section = out.setdefault(parts[0], {})
        if not isinstance(section, dict):
            raise ConfigError(parts[0], "expected an object")
        section[parts[1]] = value
    return out


# --------------------------------------------------------------------------
# deterministic random stream


LCG_A = 6364136223846793005
LCG_C = 1442695040888963407
_MASK64 = (1 << 64) - 1


def lcg_uniform(seed: int, count: int, block: int = 4096) -> np.ndarray:
    """Uniform doubles in [0, 1) from the 64-bit LCG ``s <- a s + c mod 2^64``.

    The first state is ``a * seed + c``; each state maps to ``(s >> 11) * 2^-53``.
    Vectorized by jumping ``block`` steps at a time; the stream is identical
    to the scalar recurrence.
    """
    if count <= 0:
        return np.zeros(0)
    first = []
    s = seed & _MASK64
    for _ in range(min(block, count)):
        s = (LCG_A * s + LCG_C) & _MASK64
        first.append(s)
    states = [np.array(first, dtype=np.uint64)]
    # jump coefficients: s_{j+block} = A s_j + C
    A, C = 1, 0
    for _ in range(block):
        A, C = (LCG_A * A) & _MASK64, (LCG_A * C + LCG_C) & _MASK64
    A64, C64 = np.uint64(A), np.uint64(C)
    total = len(first)
    with np.errstate(over="ignore"):
        while total < count:
            nxt = states[-1] * A64 + C64
            states.append(nxt)
            total += len(nxt)
    raw = np.concatenate(states)[:count]
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


def lcg_normal(seed: int, count: int) -> np.ndarray:
    """Unit Gaussians by Box-Muller on consecutive uniform pairs ``(u1, u2)``:
    ``sqrt(-2 ln(1 - u1)) * (cos(2 pi u2), sin(2 pi u2))``."""
    pairs = (count + 1) // 2
    u = lcg_uniform(seed, 2 * pairs).reshape(pairs, 2)
    rad = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    ang = 2.0 * np.pi * u[:, 1]
    return np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1).ravel()[:count]


def random_state_coeffs(grid: Grid, seed: int, h1_norm: float) -> tuple[np.ndarray, np.ndarray]:
    """Band-limited random (u, w) with u solenoidal and ``hypot(|u|_H1, |w|_H1) = h1_norm``.

    Samples: 3 n^3 Gaussians for u then 3 n^3 for w, C order, mapped to the
    band by the forward transform.
    """
    size = 3 * grid.n**3
    z = lcg_normal(seed, 2 * size)
    mask = dealias_mask(grid)
    u = leray_coeffs(grid, forward(grid, z[:size].reshape(3, *grid.shape)) * mask)
    w = forward(grid, z[size:].reshape(3, *grid.shape)) * mask
    nu = sobolev_norm(SpectralVectorField(grid, u), 1)
    nw = sobolev_norm(SpectralVectorField(grid, w), 1)
    scale = h1_norm / math.hypot(nu, nw) if (nu or nw) else 0.0
    return u * scale, w * scale


# --------------------------------------------------------------------------
# forcing


def _unit_perp(k: np.ndarray, polarization: list[float] | None) -> np.ndarray:
    if polarization is None:
        axis = np.zeros(3)
        axis[int(np.argmin(np.abs(k)))] = 1.0
        e = np.cross(k, axis)
    else:
        e = np.asarray(polarization, float)
        e = e - k * (e @ k) / (k @ k)
    norm = np.linalg.norm(e)
    if norm == 0:
        raise ConfigError("forcing.polarization", "polarization must not be parallel to the mode")
    return e / norm


def single_mode(grid: Grid, mode: list[int], amplitude: float = 1.0, polarization: list[float] | None = None,
                hm1_norm: float | None = None) -> SpectralVectorField:
    """Divergence-free ``A e sin(k.x / L)`` with ``e`` perpendicular to ``k``."""
    k = np.asarray(mode, float)
    e = _unit_perp(k, polarization)
    x = grid.coords()
    phase = sum(k[i] * x[i] for i in range(3)) / grid.L
    vals = e[:, None, None, None] * np.sin(phase)[None]
    f = SpectralVectorField.from_values(grid, vals)
    if hm1_norm is not None:
        return f * (hm1_norm / sobolev_norm(f, -1))
    return f * amplitude


def gaussian_bump(grid: Grid, center: list[float], width: float, amplitude: float = 1.0,
                  polarization: list[float] | None = None, hm1_norm: float | None = None,
                  solenoidal: bool = True) -> SpectralVectorField:
    """``A e exp(-|x - c|^2 / (2 width^2))``, band-limited and Leray-projected when ``solenoidal``."""
    e = np.asarray(polarization if polarization is not None else [1.0, 0.0, 0.0], float)
    if np.linalg.norm(e) == 0:
        raise ConfigError("forcing.polarization", "polarization must be nonzero")
    e = e / np.linalg.norm(e)
    x = grid.coords()
    r2 = sum((x[i] - center[i]) ** 2 for i in range(3))
    vals = e[:, None, None, None] * np.exp(-r2 / (2.0 * width**2))[None]
    c = forward(grid, vals) * dealias_mask(grid)
    if solenoidal:
        c = leray_coeffs(grid, c)
    f = SpectralVectorField(grid, c)
    if hm1_norm is not None:
        n = sobolev_norm(f, -1)
        return f * (hm1_norm / n) if n > 0 else f
    return f * amplitude


def build_forcing(cfg: Config, grid: Grid) -> tuple[SpectralVectorField, SpectralVectorField]:
    fc = cfg.forcing
    zero = SpectralVectorField.zeros(grid)
    if fc.kind == "zero":
        return zero, zero
    if fc.kind == "snapshot_file":
        from .io import read_snapshot

        snap = read_snapshot(fc.path)
        if (snap.n, snap.L) != (grid.n, grid.L):
            raise ConfigError("forcing.path", f"snapshot grid (n={snap.n}, L={snap.L}) differs from the config grid")
        f = SpectralVectorField(grid, snap.fields["f"]) if "f" in snap.fields else zero
        g = SpectralVectorField(grid, snap.fields["g"]) if "g" in snap.fields else zero
        return f, g
    out = {}
    for target in ("f", "g"):
        if fc.target not in (target, "both"):
            out[target] = zero
            continue
        if fc.kind == "single_mode":
            out[target] = single_mode(grid, fc.mode, fc.amplitude or 0.0, fc.polarization, fc.hm1_norm)
        else:
            out[target] = gaussian_bump(
                grid, fc.center, fc.width, fc.amplitude or 0.0, fc.polarization, fc.hm1_norm,
                solenoidal=(target == "f"),
            )
    return out["f"], out["g"]
