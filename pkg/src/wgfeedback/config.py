"""YAML run configuration with line-aware validation errors.

Schema::

    network:
      omega_a: 50.0            # default for atoms that omit it
      waveguide_loss: 0.0
      atoms:
        - position: 2.513      # or position_pi: 40  ->  40 * pi / omega_a
          gamma_right: 0.3
          gamma_left: 0.3      # defaults to gamma_right
          gamma_env: 0.0
    run:
      mode: one-excitation     # or two-excitation
      init: [1, 0, 0, 0]       # one-excitation amplitudes; [re, im] for complex
      pair: [1, 2]             # two-excitation: initially excited pair (1-based)
      t_end: 40.0
      dt: 0.0125
      record_every: 1
      kgrid_points: 0          # >0 also integrates the one-photon sector
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .network import AtomSpec, NetworkError, NetworkSpec

RUN_DEFAULTS = {
    "mode": "one-excitation",
    "t_end": None,  # 3 round trips
    "dt": None,  # round trip / 400
    "record_every": 1,
    "kgrid_points": 0,
    "kgrid_width": 20.0,
}
MODES = ("one-excitation", "two-excitation")


class ConfigError(ValueError):
    def __init__(self, message: str, field_path: str = "", line: int | None = None):
        where = field_path + (f" (line {line})" if line is not None else "")
        super().__init__(f"{where}: {message}" if where else message)
        self.field_path = field_path
        self.line = line


@dataclass
class RunConfig:
    network: NetworkSpec
    run: dict
    source: str = "<memory>"
    defaults_applied: list = field(default_factory=list)

    def manifest(self) -> dict:
        return {"source": self.source, "network": network_to_dict(self.network), "run": dict(self.run),
                "defaults_applied": list(self.defaults_applied)}


def _plain(node, path: str, lines: dict):
    """Convert a composed YAML node to Python objects, remembering each field's line."""
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = k.value
            if key in out:
                raise ConfigError("duplicate key", f"{path}.{key}".lstrip("."), k.start_mark.line + 1)
            out[key] = _plain(v, f"{path}.{key}".lstrip("."), lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_plain(v, f"{path}[{i}]", lines) for i, v in enumerate(node.value)]
    return yaml.SafeLoader(  # scalar: reuse the safe constructor for typing
        ""
    ).construct_object(node)


def _num(d: dict, key: str, path: str, lines: dict, default=None, minimum: float | None = None) -> float:
    if key not in d:
        if default is None:
            raise ConfigError("missing required field", f"{path}.{key}", lines.get(path))
        return default
    v = d[key]
    fp = f"{path}.{key}"
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", fp, lines.get(fp))
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError("must be finite", fp, lines.get(fp))
    if minimum is not None and v < minimum:
        raise ConfigError(f"must be >= {minimum}", fp, lines.get(fp))
    return v


def parse_config(text: str, source: str = "<memory>") -> RunConfig:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", "", mark.line + 1 if mark else None) from exc
    if root is None:
        raise ConfigError("empty configuration")
    lines: dict = {}
    data = _plain(root, "", lines)
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", "", lines.get(""))
    unknown = set(data) - {"network", "run"}
    if unknown:
        k = sorted(unknown)[0]
        raise ConfigError("unknown section", k, lines.get(k))
    if "network" not in data:
        raise ConfigError("missing required section", "network", 1)
    net_d = data["network"]
    if not isinstance(net_d, dict):
        raise ConfigError("must be a mapping", "network", lines.get("network"))
    omega_default = net_d.get("omega_a")
    loss = _num(net_d, "waveguide_loss", "network", lines, default=0.0, minimum=0.0)
    atoms_d = net_d.get("atoms")
    if not isinstance(atoms_d, list) or not atoms_d:
        raise ConfigError("need a non-empty list of atoms", "network.atoms", lines.get("network.atoms", lines.get("network")))
    atoms = []
    prev = -math.inf
    for i, a in enumerate(atoms_d):
        p = f"network.atoms[{i}]"
        if not isinstance(a, dict):
            raise ConfigError("atom entry must be a mapping", p, lines.get(p))
        extra = set(a) - {"position", "position_pi", "gamma_right", "gamma_left", "omega_a", "gamma_env"}
        if extra:
            k = sorted(extra)[0]
            raise ConfigError("unknown atom field", f"{p}.{k}", lines.get(f"{p}.{k}"))
        wa = _num(a, "omega_a", p, lines, default=None if omega_default is None else float(omega_default), minimum=0.0)
        if "position" in a and "position_pi" in a:
            raise ConfigError("give position or position_pi, not both", p, lines.get(p))
        if "position_pi" in a:
            z = _num(a, "position_pi", p, lines, minimum=0.0) * math.pi / wa
        else:
            z = _num(a, "position", p, lines, minimum=0.0)
        if z < prev:
            raise ConfigError("atom positions must be sorted (non-decreasing)", f"{p}.position", lines.get(f"{p}.position", lines.get(p)))
        prev = z
        gr = _num(a, "gamma_right", p, lines, minimum=0.0)
        gl = _num(a, "gamma_left", p, lines, default=gr, minimum=0.0)
        genv = _num(a, "gamma_env", p, lines, default=0.0, minimum=0.0)
        try:
            atoms.append(AtomSpec(z, gr, gl, wa, genv))
        except (NetworkError, ValueError) as exc:
            raise ConfigError(str(exc), p, lines.get(p)) from exc
    try:
        net = NetworkSpec(tuple(atoms), loss)
        net.omega_a
    except (NetworkError, ValueError) as exc:
        raise ConfigError(str(exc), "network", lines.get("network")) from exc

    run_d = data.get("run", {})
    if not isinstance(run_d, dict):
        raise ConfigError("must be a mapping", "run", lines.get("run"))
    extra = set(run_d) - set(RUN_DEFAULTS) - {"init", "pair"}
    if extra:
        k = sorted(extra)[0]
        raise ConfigError("unknown run field", f"run.{k}", lines.get(f"run.{k}"))
    run, applied = resolve_run(net, run_d, lines)
    return RunConfig(net, run, source, applied)


def resolve_run(net: NetworkSpec, run_d: dict, lines: dict | None = None) -> tuple[dict, list]:
    lines = lines or {}
    applied = []
    run = {}
    mode = run_d.get("mode", RUN_DEFAULTS["mode"])
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}", "run.mode", lines.get("run.mode"))
    if "mode" not in run_d:
        applied.append("mode")
    run["mode"] = mode
    tau = max(2 * a.position for a in net.atoms) / net.light_speed
    tau_min = min((2 * a.position for a in net.atoms if a.position > 0), default=0.0) / net.light_speed
    if "t_end" in run_d:
        run["t_end"] = _num(run_d, "t_end", "run", lines, minimum=0.0)
    else:
        run["t_end"] = 3 * tau if tau > 0 else 10.0
        applied.append("t_end")
    if "dt" in run_d:
        run["dt"] = _num(run_d, "dt", "run", lines, minimum=0.0)
    else:
        from .network import build_one_excitation_system

        delays = build_one_excitation_system(net).delays
        run["dt"] = min(tau_min / 400, min(delays) / 4) if delays else 0.01
        applied.append("dt")
    if run["t_end"] <= 0 or run["dt"] <= 0:
        raise ConfigError("t_end and dt must be > 0", "run", lines.get("run"))
    re = run_d.get("record_every", 1)
    if not isinstance(re, int) or isinstance(re, bool) or re < 1:
        raise ConfigError("record_every must be a positive integer", "run.record_every", lines.get("run.record_every"))
    run["record_every"] = re
    n = net.n_atoms
    if mode == "one-excitation":
        init = run_d.get("init")
        if init is None:
            init = [1.0] + [0.0] * (n - 1)
            applied.append("init")
        if not isinstance(init, list) or len(init) != n:
            raise ConfigError(f"init must list {n} amplitudes", "run.init", lines.get("run.init"))
        vals = []
        for i, v in enumerate(init):
            try:
                if isinstance(v, list) and len(v) == 2:
                    vals.append(complex(float(v[0]), float(v[1])))
                elif isinstance(v, (int, float)) and not isinstance(v, bool):
                    vals.append(complex(v))
                else:
                    raise TypeError
            except (TypeError, ValueError):
                raise ConfigError(f"not a number: {v!r}", f"run.init[{i}]", lines.get(f"run.init[{i}]")) from None
        if sum(abs(v) ** 2 for v in vals) > 1 + 1e-9:
            raise ConfigError("initial amplitudes must have norm <= 1", "run.init", lines.get("run.init"))
        run["init"] = [v.real if v.imag == 0 else [v.real, v.imag] for v in vals]
    else:
        if n < 2:
            raise ConfigError("two-excitation mode needs at least two atoms", "network.atoms", lines.get("network.atoms"))
        pair = run_d.get("pair", [1, 2])
        if "pair" not in run_d:
            applied.append("pair")
        if (not isinstance(pair, list) or len(pair) != 2 or any(not isinstance(p, int) for p in pair)
                or pair[0] == pair[1] or min(pair) < 1 or max(pair) > n):
            raise ConfigError("pair must name two different atoms (1-based)", "run.pair", lines.get("run.pair"))
        run["pair"] = sorted(pair)
    for key in ("kgrid_points", "kgrid_width"):
        if key in run_d:
            run[key] = run_d[key]
        else:
            run[key] = RUN_DEFAULTS[key]
            applied.append(key)
    if not isinstance(run["kgrid_points"], int) or run["kgrid_points"] < 0:
        raise ConfigError("kgrid_points must be a non-negative integer", "run.kgrid_points", lines.get("run.kgrid_points"))
    return run, applied


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(p)) from exc
    return parse_config(text, str(p))


def network_to_dict(net: NetworkSpec) -> dict:
    return {
        "waveguide_loss": net.waveguide_loss,
        "atoms": [
            {"position": a.position, "gamma_right": a.gamma_right, "gamma_left": a.gamma_left,
             "omega_a": a.omega_a, "gamma_env": a.gamma_env}
            for a in net.atoms
        ],
    }


def dump_config(cfg: RunConfig) -> str:
    """YAML text that parses back to the same network and run settings."""
    return yaml.safe_dump({"network": network_to_dict(cfg.network), "run": _yaml_run(cfg.run)}, sort_keys=False)


def _yaml_run(run: dict) -> dict:
    return {k: v for k, v in run.items()}


def init_vector(run: dict):
    import numpy as np

    return np.array([complex(*v) if isinstance(v, list) else complex(v) for v in run["init"]])
