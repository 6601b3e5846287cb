"""Declarative scenarios: JSON config -> trajectories, check reports and a run manifest.

A scenario names a game, an EDM, a loop and a list of initial conditions.
Each initial condition is integrated on a bounded thread pool (the compiled
integrator releases the GIL), trajectory-level checks run on the finished
trajectory, and global checks (storage audits, condition checks, searches)
run once per scenario.
"""
import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from . import edm as edms
from . import engine, games, passivity, perturbations, protocols
from .reports import CheckReport
from .state import ValidationError, make_state, random_interior_states
from .storage import energy_function, kl_energy
from .svg import emit_simplex_svg

log = logging.getLogger(__name__)

THREADS_ENV = "EVOLAB_THREADS"


class ConfigError(ValueError):
    """Invalid or unresolvable scenario configuration (CLI exit code 2)."""


class NumericRunError(RuntimeError):
    """An integration stopped early; ``manifest`` holds what was produced (exit code 3)."""

    def __init__(self, message, manifest):
        super().__init__(message)
        self.manifest = manifest


# ---------------------------------------------------------------- registries

@dataclass(frozen=True)
class GameBuild:
    game: games.GameDescriptor
    potential: Optional[games.Potential] = None
    a: Optional[np.ndarray] = None


_STATE = {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2}
_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_VECTOR = {"type": "array", "items": {"type": "number"}}
_PERTURBATION = {
    "type": "object",
    "properties": {"kind": {"enum": ["entropy", "log-barrier"]}, "eta": {"type": "number", "exclusiveMinimum": 0}},
    "required": ["kind"],
    "additionalProperties": False,
}


def _bump(params):
    return games.BumpFunction.from_radii(params.get("R_I", 0.1), params.get("R_O", 0.4))


def _game_hypnodisk(p):
    return GameBuild(games.hypnodisk(_bump(p)))


def _game_hypnodisk_perturbed(p):
    return GameBuild(games.perturbed_hypnodisk(_bump(p)))


def _game_anti_coordination(p):
    return GameBuild(games.anti_coordination(p.get("x_o", [1 / 3] * 3)))


def _game_perturbed_potential(p):
    n = p.get("n", 3)
    f = games.quadratic_potential(p.get("Q"), p.get("b"), n=n)
    a = None if p.get("a") is None else np.array(p["a"], dtype=float)
    return GameBuild(games.perturbed_potential(f, a, n=n), f, a)


def _game_extended_hypnodisk(p):
    return GameBuild(games.extended_hypnodisk(p.get("n", 4), p.get("nu"), _bump(p)))


def _game_linear(p):
    if "A" not in p:
        raise ConfigError("linear game needs a matrix 'A'")
    return GameBuild(games.linear(p["A"], p.get("c")))


_RADII = {"R_I": {"type": "number", "exclusiveMinimum": 0}, "R_O": {"type": "number", "exclusiveMinimum": 0}}

GAMES = {
    "hypnodisk": (_game_hypnodisk, _RADII, "3-strategy Hypnodisk (limit cycle for payoff-monotonic dynamics)"),
    "hypnodisk-perturbed": (_game_hypnodisk_perturbed, _RADII, "Hypnodisk plus (-ln x_i - 1)"),
    "anti-coordination": (_game_anti_coordination, {"x_o": _STATE}, "F(x) = -(x - x_o)"),
    "perturbed-potential": (_game_perturbed_potential,
                            {"n": {"type": "integer", "minimum": 2}, "Q": _MATRIX, "b": _VECTOR, "a": _VECTOR},
                            "gradient of x'Qx/2 + b'x + sum x_i ln(a_i/x_i); default Q = -I"),
    "extended-hypnodisk": (_game_extended_hypnodisk,
                           dict(_RADII, n={"type": "integer", "minimum": 3}, nu={"type": "number"}),
                           "Hypnodisk on (x1, x2, x3+...+xn); optional rescaling to bound nu"),
    "linear": (_game_linear, {"A": _MATRIX, "c": _VECTOR}, "F(x) = A x + c"),
}


def _perturbation(spec):
    spec = spec or {"kind": "entropy"}
    eta = spec.get("eta", 1.0)
    return perturbations.entropy(eta) if spec["kind"] == "entropy" else perturbations.log_barrier(eta)


def _edm_logit(p, build):
    eta = p.get("eta", 1.0)
    if eta == "auto":
        bound = games.jacobian_bound_estimate(build.game, p.get("auto_samples", 10_000),
                                              np.random.default_rng(p.get("auto_seed", 0)))
        eta = p.get("auto_factor", 1.1) * bound
        if eta <= 0:
            raise ConfigError(f"jacobian bound {bound:.3g} is not positive; set eta explicitly")
    return edms.logit(float(eta))


def _edm_ept(p, build):
    return edms.ept(protocols.power_ept(p.get("power", 1)) if p.get("power", 1) != 1 else protocols.BNN)


def _edm_pairwise(p, build):
    return edms.pairwise(protocols.power_pairwise(p.get("power", 1)) if p.get("power", 1) != 1 else protocols.SMITH)


def _edm_perturbed(p, build):
    base = p.get("base", "bnn")
    if base not in ("bnn", "smith"):
        raise ConfigError("perturbed base must be 'bnn' or 'smith'")
    return edms.perturbed(edms.bnn() if base == "bnn" else edms.smith(), _perturbation(p.get("perturbation")))


EDMS = {
    "replicator": (lambda p, b: edms.replicator(), {}, "x_i (p_i - p'x)"),
    "bnn": (lambda p, b: edms.bnn(), {}, "Brown-von Neumann-Nash"),
    "smith": (lambda p, b: edms.smith(), {}, "Smith pairwise comparison"),
    "logit": (_edm_logit, {"eta": {"anyOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "auto"}]},
                           "auto_factor": {"type": "number"}, "auto_samples": {"type": "integer"},
                           "auto_seed": {"type": "integer"}},
              "logit(eta); eta='auto' uses 1.1 x the sampled Jacobian bound of the game"),
    "ept": (_edm_ept, {"power": {"type": "number", "exclusiveMinimum": 0}}, "EPT with rho_i = [p_hat_i]_+^power"),
    "pairwise": (_edm_pairwise, {"power": {"type": "number", "exclusiveMinimum": 0}},
                 "pairwise comparison with rho(d) = [d]_+^power"),
    "pbr": (lambda p, b: edms.pbr(_perturbation(p.get("perturbation"))), {"perturbation": _PERTURBATION},
            "perturbed best response with an entropy or log-barrier perturbation"),
    "perturbed": (_edm_perturbed, {"base": {"enum": ["bnn", "smith"]}, "perturbation": _PERTURBATION},
                  "BNN/Smith at the shifted payoff p - grad v(x)"),
}

CHECKS = {
    "check:p1": ({"samples": {"type": "integer"}, "h": {"type": "number"}}, "global",
                 "p-gradient of the storage equals the field"),
    "check:p2": ({"samples": {"type": "integer"}, "eta": {"type": "number", "minimum": 0}}, "global",
                 "x-derivative of the storage along V is <= -eta |V|^2"),
    "check:ns": ({"samples": {"type": "integer"}}, "global", "rest points are exactly best responses"),
    "check:pc": ({"samples": {"type": "integer"}}, "global", "p'V >= 0"),
    "check:spc": ({"samples": {"type": "integer"}}, "global", "V != 0 implies p'V > 0"),
    "check:zero-set": ({"samples": {"type": "integer"}}, "global", "zero storage implies rest"),
    "check:strict-output": ({"eta_grid": _VECTOR, "budget": {"type": "integer"}}, "global",
                            "search for (P2) violations at each eta"),
    "check:trajectory-passivity": ({"eta": {"type": "number"}, "window": {"type": "number"}}, "trajectory",
                                   "windowed supplied minus stored energy >= -tol"),
    "check:monotone": ({"column": {"type": "string"}, "direction": {"enum": ["nonincreasing", "nondecreasing"]},
                        "tol": {"type": "number"}}, "trajectory", "a scalar column never moves uphill"),
    "check:oscillation": ({"column": {"type": "string"}, "after": {"type": "number"},
                           "min_sign_changes": {"type": "integer"}}, "trajectory",
                          "the column's time derivative changes sign often enough"),
    "check:rest-point": ({"tol": {"type": "number"}}, "trajectory",
                         "final state is a fixed point of the closed loop"),
}

SCALARS = ("storage", "energy", "kl", "distance")


def parse_name(name):
    """``"logit(5)"`` -> ``("logit", {"eta": 5.0})``; plain names pass through."""
    m = re.fullmatch(r"\s*([a-z\-]+)\s*\(\s*([^)]*)\s*\)\s*", name)
    if not m:
        return name.strip(), {}
    base, arg = m.group(1), m.group(2)
    if base == "logit":
        return base, {"eta": "auto" if arg == "auto" else float(arg)}
    if base == "perturbed":
        parts = [a.strip() for a in arg.split(",")]
        params = {"base": parts[0]}
        if len(parts) > 1:
            params["perturbation"] = {"kind": parts[1]}
        return base, params
    if base in ("ept", "pairwise"):
        return base, {"power": float(arg)}
    if base == "pbr":
        return base, {"perturbation": {"kind": arg}}
    return base, {}


def list_registry():
    """Text listing of games, EDMs and checks with their parameter schemas."""
    lines = ["games:"]
    for name, (_, schema, doc) in GAMES.items():
        lines.append(f"  {name:22s} {doc}")
        lines.append(f"  {'':22s} params: {json.dumps(schema, sort_keys=True)}")
    lines.append("edms:")
    for name, (_, schema, doc) in EDMS.items():
        lines.append(f"  {name:22s} {doc}")
        lines.append(f"  {'':22s} params: {json.dumps(schema, sort_keys=True)}")
    lines.append("checks:")
    for name, (schema, scope, doc) in CHECKS.items():
        lines.append(f"  {name:28s} [{scope}] {doc}")
        lines.append(f"  {'':28s} params: {json.dumps(schema, sort_keys=True)}")
    lines.append("scalar columns: " + ", ".join(SCALARS))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- config

_COMPONENT = {
    "anyOf": [
        {"type": "string"},
        {"type": "object", "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
         "required": ["name"], "additionalProperties": False},
    ]
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0},
        "game": _COMPONENT,
        "edm": _COMPONENT,
        "loop": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["static", "smoothed", "mean_removed"]},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "lam": {"type": "number", "exclusiveMinimum": 0},
                "p0": {"anyOf": [_VECTOR, {"const": "payoff"}]},
                "record_every": {"type": "integer", "minimum": 1},
            },
            "required": ["kind", "dt", "T"],
            "additionalProperties": False,
        },
        "initial_conditions": {
            "anyOf": [
                {"type": "array", "items": _STATE, "minItems": 1},
                {"type": "object", "properties": {"count": {"type": "integer", "minimum": 1},
                                                  "alpha": {"type": "number", "exclusiveMinimum": 0}},
                 "required": ["count"], "additionalProperties": False},
            ]
        },
        "target": {"anyOf": [_STATE, {"enum": ["centroid", "nash"]}]},
        "convergence": {"type": "object", "properties": {"tol": {"type": "number", "exclusiveMinimum": 0},
                                                         "window": {"type": "number", "exclusiveMinimum": 0}},
                        "additionalProperties": False},
        "scalars": {"type": "array", "items": {"enum": list(SCALARS)}},
        "checks": {"type": "array", "items": {
            "type": "object",
            "properties": {"name": {"enum": list(CHECKS)}, "params": {"type": "object"},
                           "expect": {"enum": ["pass", "fail"]}},
            "required": ["name"], "additionalProperties": False}},
        "outputs": {"type": "object", "properties": {k: {"type": "boolean"} for k in ("csv", "summary", "svg")},
                    "additionalProperties": False},
        "description": {"type": "string"},
    },
    "required": ["name", "game", "edm", "loop", "initial_conditions"],
    "additionalProperties": False,
}


def _component(value):
    if isinstance(value, str):
        name, params = parse_name(value)
        return {"name": name, "params": params}
    return {"name": value["name"], "params": dict(value.get("params", {}))}


@dataclass
class ScenarioConfig:
    name: str
    game: dict
    edm: dict
    loop: dict
    initial_conditions: object
    seed: int = 0
    target: object = "nash"
    convergence: dict = field(default_factory=lambda: {"tol": 1e-3})
    scalars: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    outputs: dict = field(default_factory=lambda: {"csv": True, "summary": True, "svg": True})
    description: str = ""

    @classmethod
    def from_dict(cls, data):
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {where}: {exc.message}") from None
        cfg = cls(
            name=data["name"], game=_component(data["game"]), edm=_component(data["edm"]),
            loop=dict(data["loop"]), initial_conditions=data["initial_conditions"],
            seed=data.get("seed", 0), target=data.get("target", "nash"),
            convergence=dict({"tol": 1e-3}, **data.get("convergence", {})),
            scalars=list(data.get("scalars", [])),
            checks=[dict(c, params=dict(c.get("params", {}))) for c in data.get("checks", [])],
            outputs=dict({"csv": True, "summary": True, "svg": True}, **data.get("outputs", {})),
            description=data.get("description", ""),
        )
        cfg._validate_components()
        return cfg

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        return cls.from_dict(data)

    def _validate_components(self):
        if self.game["name"] not in GAMES:
            raise ConfigError(f"unknown game {self.game['name']!r}; see 'evolab list'")
        if self.edm["name"] not in EDMS:
            raise ConfigError(f"unknown edm {self.edm['name']!r}; see 'evolab list'")
        for kind, reg, comp in (("game", GAMES, self.game), ("edm", EDMS, self.edm)):
            schema = {"type": "object", "properties": reg[comp["name"]][1], "additionalProperties": False}
            try:
                jsonschema.validate(comp["params"], schema)
            except jsonschema.ValidationError as exc:
                raise ConfigError(f"{kind} {comp['name']!r} params: {exc.message}") from None
        for c in self.checks:
            schema = {"type": "object", "properties": CHECKS[c["name"]][0], "additionalProperties": False}
            try:
                jsonschema.validate(c["params"], schema)
            except jsonschema.ValidationError as exc:
                raise ConfigError(f"{c['name']} params: {exc.message}") from None
        if self.loop["T"] < self.loop["dt"]:
            raise ConfigError("loop.T must be at least loop.dt")

    def to_dict(self):
        out = asdict(self)
        if not out["description"]:
            del out["description"]
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- building

@dataclass
class Built:
    build: GameBuild
    edm: edms.EdmDescriptor
    states: np.ndarray
    target: np.ndarray
    rngs: list


def build(cfg: ScenarioConfig):
    """Resolve registry names and sample initial conditions; raises ConfigError."""
    try:
        gb = GAMES[cfg.game["name"]][0](cfg.game["params"])
        e = EDMS[cfg.edm["name"]][0](cfg.edm["params"], gb)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot build scenario components: {exc}") from None
    n = gb.game.n
    # one seed, split into independent counter-based streams: [ICs, checks...]
    seq = np.random.SeedSequence(cfg.seed)
    children = seq.spawn(1 + len(cfg.checks))
    rngs = [np.random.Generator(np.random.Philox(c)) for c in children]
    ics = cfg.initial_conditions
    try:
        if isinstance(ics, dict):
            states = random_interior_states(rngs[0], ics["count"], n, ics.get("alpha", 1.0))
        else:
            states = np.array([make_state(w, strict=True) for w in ics])
    except ValidationError as exc:
        raise ConfigError(f"initial condition: {exc}") from None
    if states.shape[-1] != n:
        raise ConfigError(f"initial conditions have {states.shape[-1]} entries, game has n={n}")
    if (e.interior_only or gb.game.interior_only) and np.any(states <= 0):
        raise ConfigError("this game/EDM needs interior initial conditions")
    target = cfg.target
    if isinstance(target, str):
        if target == "nash" and gb.game.known_equilibria:
            target = gb.game.known_equilibria[0]
        else:
            target = np.full(n, 1.0 / n)
    target = np.asarray(target, dtype=float)
    return Built(gb, e, states, target, rngs[1:])


def _scalar_functions(cfg, b):
    out = {}
    for name in cfg.scalars:
        if name == "storage":
            if b.edm.storage is None:
                raise ConfigError(f"{b.edm.name} has no storage function")
            out["storage"] = b.edm.storage
        elif name == "energy":
            if b.edm.storage is None or b.build.potential is None:
                raise ConfigError("energy needs an EDM with storage and the perturbed-potential game")
            out["energy"] = energy_function(b.edm.storage, b.build.potential, b.build.a, b.build.game.n)
        elif name == "kl":
            target = b.target
            out["kl"] = lambda p, x, t=target: kl_energy(x, t)
        elif name == "distance":
            target = b.target
            out["distance"] = lambda p, x, t=target: np.linalg.norm(x - t, axis=-1)
    return out


def _loop(cfg, b, x0):
    lp = cfg.loop
    p0 = lp.get("p0", "payoff")
    p0 = None if p0 == "payoff" else np.asarray(p0, dtype=float)
    try:
        return engine.LoopConfig(lp["kind"], x0, lp["T"], lp["dt"], game=b.build.game, p0=p0,
                                 lam=lp.get("lam", 1.0), record_every=lp.get("record_every", 1))
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------- checks

def _trajectory_check(spec, traj, b, cfg):
    name, prm = spec["name"], spec["params"]
    if name == "check:trajectory-passivity":
        if b.edm.storage is None:
            raise ConfigError(f"{b.edm.name} has no storage function")
        eta = prm.get("eta", 0.0)
        res = passivity.trajectory_passivity(traj, b.edm.storage, eta, prm.get("window", 1.0))
        vals = np.array([r.residual for r in res])
        tols = np.array([r.tol for r in res])
        idx = np.minimum(np.searchsorted(traj.times, [r.t0 for r in res]), traj.times.size - 1)
        return CheckReport.from_margins(f"trajectory-passivity:{b.edm.name}", traj.payoffs[idx],
                                        traj.states[idx], -vals, tols, details={"eta": eta, "windows": len(res)})
    if name == "check:monotone":
        return engine.scalar_monotone(traj, prm.get("column", "storage"), prm.get("direction", "nonincreasing"),
                                      prm.get("tol", 1e-6))
    if name == "check:oscillation":
        col = prm.get("column", "kl")
        k = engine.sign_changes(traj.column(col), traj.times, prm.get("after", 10.0))
        need = prm.get("min_sign_changes", 3)
        return CheckReport(f"oscillation:{col}", int(traj.times.size), [], float(need - k),
                           "pass" if k >= need else "fail", 0 if k >= need else 1,
                           {"sign_changes": k, "required": need})
    if name == "check:rest-point":
        x, p = traj.states[-1], traj.payoffs[-1]
        if cfg.loop["kind"] == "mean_removed":
            gap = np.abs(b.build.game(x) - p.mean()).max()
        else:
            gap = np.abs(b.edm(p, x)).max()
        return CheckReport.from_margins("rest-point", p[None], x[None], [gap], prm.get("tol", 1e-4))
    raise ConfigError(f"{name} is not a trajectory check")


def _global_check(spec, b, rng):
    name, prm = spec["name"], spec["params"]
    e, s = b.edm, b.edm.storage
    samples = prm.get("samples", 1000)
    if name in ("check:p1", "check:p2", "check:zero-set", "check:strict-output") and s is None:
        if name == "check:p2" and e.name == "replicator":
            from .storage import REPLICATOR_CANDIDATE
            s = REPLICATOR_CANDIDATE
        else:
            raise ConfigError(f"{e.name} has no storage function for {name}")
    if name == "check:p1":
        return passivity.check_p1(s, e, samples, prm.get("h", 1e-5), rng=rng)
    if name == "check:p2":
        return passivity.check_p2(s, e, prm.get("eta", e.eta), samples, rng=rng, structured=not e.interior_only)
    if name in ("check:ns", "check:pc", "check:spc"):
        return passivity.check_conditions(e, name.split(":")[1].upper(), samples, rng=rng)
    if name == "check:zero-set":
        return passivity.zero_storage_implies_rest(s, e, samples, rng=rng)
    if name == "check:strict-output":
        res = passivity.strict_output_violation_search(e, s, prm.get("eta_grid", [0.01, 0.1, 1.0]),
                                                       prm.get("budget", 100_000), rng=rng)
        # a single report: fail if any eta failed
        reports = list(res.values())
        worst = max(reports, key=lambda r: r.worst_margin)
        verdicts = {str(k): r.verdict for k, r in res.items()}
        verdict = "fail" if "fail" in verdicts.values() else (
            "inconclusive" if "inconclusive" in verdicts.values() else "pass")
        return CheckReport(f"strict-output:{e.name}", sum(r.samples for r in reports),
                           [w for r in reports for w in r.violations][:25], worst.worst_margin, verdict,
                           sum(r.n_violations for r in reports), {"per_eta": verdicts})
    raise ConfigError(f"{name} is not a global check")


# ---------------------------------------------------------------- running

@dataclass
class RunManifest:
    scenario: str
    version: str
    seed: int
    out_dir: str
    runs: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    svg: Optional[str] = None
    status: str = "ok"
    errors: list = field(default_factory=list)

    @property
    def all_converged(self):
        return all(r["converged"] for r in self.runs)

    @property
    def expectations_met(self):
        items = self.checks + [c for r in self.runs for c in r["checks"]]
        return all(c.get("expectation_met", True) for c in items)

    def to_dict(self):
        return asdict(self)

    def write(self, path=None):
        path = Path(path or Path(self.out_dir) / "manifest.json")
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def _with_expectation(report, spec):
    d = report.to_dict()
    expect = spec.get("expect")
    if expect is not None:
        d["expect"] = expect
        d["expectation_met"] = report.verdict == expect
    return d


def worker_count(default=None):
    env = os.environ.get(THREADS_ENV)
    cap = os.cpu_count() or 1
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return max(1, min(cap, default or cap))


def _run_ic(k, x0, cfg, b, scalars, out_dir, use_kernel):
    traj = engine.integrate(b.edm, _loop(cfg, b, x0), scalars=scalars, use_kernel=use_kernel)
    conv = engine.converged(traj, b.target, cfg.convergence["tol"], cfg.convergence.get("window"))
    checks = []
    for spec in cfg.checks:
        if CHECKS[spec["name"]][1] == "trajectory":
            checks.append(_with_expectation(_trajectory_check(spec, traj, b, cfg), spec))
    summary = {
        "scenario": cfg.name,
        "ic": k,
        "initial_state": x0.tolist(),
        "converged": conv.converged,
        "first_hit_t": conv.first_hit,
        "final_state": traj.states[-1].tolist(),
        "final_distance": conv.final_distance,
        "checks": checks,
        "error": traj.error,
        "meta": traj.meta,
    }
    files = {}
    if out_dir is not None:
        if cfg.outputs.get("csv", True):
            files["csv"] = str(out_dir / f"ic-{k}.csv")
            traj.to_csv(files["csv"])
        if cfg.outputs.get("summary", True):
            files["summary"] = str(out_dir / f"ic-{k}.json")
            Path(files["summary"]).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return traj, dict(summary, files=files)


def run_scenario(config, out_dir=None, threads=None, use_kernel=True, return_trajectories=False):
    """Run every initial condition and check of a scenario and write its outputs.

    ``config`` is a path or a :class:`ScenarioConfig`. Outputs go to
    ``out_dir`` (default ``./runs/<name>``); pass ``out_dir=False`` to skip
    writing. Raises :class:`ConfigError` or :class:`NumericRunError`.
    """
    cfg = config if isinstance(config, ScenarioConfig) else ScenarioConfig.load(config)
    b = build(cfg)
    scalars = _scalar_functions(cfg, b)
    if out_dir is False:
        out = None
    else:
        out = Path(out_dir) if out_dir is not None else Path("runs") / cfg.name
        out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg.name, __version__, cfg.seed, str(out) if out else "")
    workers = threads or worker_count(len(b.states) + len(cfg.checks))
    global_specs = [(i, s) for i, s in enumerate(cfg.checks) if CHECKS[s["name"]][1] == "global"]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        ic_futures = [pool.submit(_run_ic, k, x0, cfg, b, scalars, out, use_kernel)
                      for k, x0 in enumerate(b.states)]
        check_futures = [(s, pool.submit(_global_check, s, b, b.rngs[i])) for i, s in global_specs]
        results = [f.result() for f in ic_futures]
        manifest.checks = [_with_expectation(f.result(), s) for s, f in check_futures]
    trajs = [t for t, _ in results]
    manifest.runs = [r for _, r in results]
    for r in manifest.runs:
        if r["error"]:
            manifest.status = "numeric-error"
            manifest.errors.append(f"ic-{r['ic']}: {r['error']}")
    if out is not None and cfg.outputs.get("svg", True) and b.build.game.n == 3:
        manifest.svg = str(out / f"{cfg.name}.svg")
        markers = list(b.build.game.known_equilibria) or [b.target]
        emit_simplex_svg(trajs, markers, manifest.svg, title=cfg.name)
    if out is not None:
        manifest.write()
    if manifest.status != "ok":
        raise NumericRunError("; ".join(manifest.errors), manifest)
    if return_trajectories:
        return manifest, trajs
    return manifest


def run_checks(config, threads=None):
    """Run only the global checks of a scenario (no integration)."""
    cfg = config if isinstance(config, ScenarioConfig) else ScenarioConfig.load(config)
    b = build(cfg)
    specs = [(i, s) for i, s in enumerate(cfg.checks) if CHECKS[s["name"]][1] == "global"]
    with ThreadPoolExecutor(max_workers=threads or worker_count(len(specs))) as pool:
        futures = [(s, pool.submit(_global_check, s, b, b.rngs[i])) for i, s in specs]
        return [(s, f.result()) for s, f in futures]


def bundled_scenarios():
    """Paths of the scenario configs shipped with the package."""
    here = Path(__file__).parent / "scenarios"
    return sorted(here.glob("*.json"))


def bundled(name):
    path = Path(__file__).parent / "scenarios" / f"{name}.json"
    if not path.exists():
        raise ConfigError(f"no bundled scenario {name!r}")
    return path
