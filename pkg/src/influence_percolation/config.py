"""Flat ``dotted.key = value`` configuration.

A config file holds one assignment per line; ``#`` starts a comment and
values are JSON literals (bare words are taken as strings)::

    sbm.n = 2000
    sbm.rho = [0.5, 0, 0.5]
    scenario.theta = 20
    scenario.block_seed_fractions.3.1 = 0.25

Blocks and candidates are numbered from 1 in configuration and output, and
from 0 in the Python API. Resolution order: defaults, preset, config file,
``--set`` overrides, dedicated command-line flags.
"""

from __future__ import annotations

import json
import re
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from .dynamics import ScenarioConfig
from .errors import ParameterError, UsageError
from .graph import BlockModelParams, Graph, estimate_block_probs
from .meanfield import MeanFieldScenario
from .sweep import Axis, SweepSpec

DEFAULTS: dict[str, object] = {
    "scenario.theta": 20.0,
    "scenario.T": 1e6,
    "scenario.beta": 0.8,
    "scenario.seed": 0,
    "scenario.early_stop": True,
    "scenario.eps_stop": 1e-6,
    "scenario.engine": "numba",
    "sbm.seed": 0,
    "threshold.k_star": 1,
    "trajectory.max_iters": 1_000_000,
    "trajectory.eps": 1e-8,
    "sweep.replicas": 1,
    "sweep.seed": 0,
    "sweep.estimator": "pair",
}

PRESETS: dict[str, dict[str, object]] = {
    # one eager candidate: block 1 seeded for candidate 1, undecided voters in block 3
    "one-eager": {
        "sbm.n": 2000, "sbm.b": 3, "sbm.p_in": 0.8, "sbm.p_out": 0.2, "sbm.rho": [0.5, 0.0, 0.5],
        "scenario.theta": 20.0, "scenario.beta": 0.8, "scenario.T": 1e6,
        "scenario.block_seed_fractions.3.1": 0.25,
    },
    # candidates 1 and 2 compete for block 4; candidate 3 has no seeds at all
    "two-competing": {
        "sbm.n": 3000, "sbm.b": 4, "sbm.p_in": 0.9, "sbm.p_out": 0.1, "sbm.rho": [1 / 3, 1 / 3, 0.0, 1 / 3],
        "scenario.theta": 100.0, "scenario.beta": 0.8, "scenario.T": 3e6,
        "scenario.block_seed_fractions.4.1": 0.0, "scenario.block_seed_fractions.4.2": 0.0,
    },
    # block model fitted to the pruned Political Blogs network (508 / 587 split)
    "polblogs": {
        "sbm.n": 1095, "sbm.b": 3, "sbm.p_in": 0.9224, "sbm.p_out": 0.0776, "sbm.rho": [508 / 1095, 0.0, 587 / 1095],
        "scenario.theta": 20.0, "scenario.beta": 0.8, "scenario.T": 1e6,
        "scenario.block_seed_fractions.3.1": 0.25,
    },
}

_FIXED_KEYS = {
    "graph.file", "sbm.n", "sbm.b", "sbm.p_in", "sbm.p_out", "sbm.rho", "sbm.seed",
    "scenario.beta", "scenario.theta", "scenario.T", "scenario.K", "scenario.initial_ppv", "scenario.seed",
    "scenario.early_stop", "scenario.eps_stop", "scenario.window", "scenario.stride", "scenario.engine",
    "scenario.rebuild_every", "scenario.whole_block_seeds",
    "threshold.k_star", "trajectory.max_iters", "trajectory.eps",
    "sweep.axis1", "sweep.axis1_values", "sweep.axis1_range", "sweep.axis2", "sweep.axis2_values",
    "sweep.axis2_range", "sweep.betas", "sweep.replicas", "sweep.seed", "sweep.workers", "sweep.k_star",
    "sweep.estimator",
    "output.dir",
}
_SEED_KEY = re.compile(r"^scenario\.block_seed_fractions\.(\d+)\.(\d+)$")
_WHOLE_KEY = re.compile(r"^scenario\.whole_block_seeds\.(\d+)$")


def parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip("'\"")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, object]:
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise UsageError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = parse_value(value)
    return out


def load_config_file(path: str | Path) -> dict[str, object]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def parse_assignment(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise UsageError(f"--set expects KEY=VALUE, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), parse_value(value)


def _check_keys(conf: Mapping[str, object]) -> None:
    for key in conf:
        if key not in _FIXED_KEYS and not _SEED_KEY.match(key) and not _WHOLE_KEY.match(key):
            raise UsageError(f"unknown configuration key {key!r}")


def resolve(
    preset: str | None = None,
    file_conf: Mapping[str, object] | None = None,
    overrides: Mapping[str, object] | None = None,
    flags: Mapping[str, object] | None = None,
) -> dict[str, object]:
    """Merge configuration layers; a flag that contradicts an override is an error."""
    conf: dict[str, object] = dict(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise UsageError(f"unknown preset {preset!r} (choose from {', '.join(sorted(PRESETS))})")
        conf.update(PRESETS[preset])
    conf.update(file_conf or {})
    overrides = dict(overrides or {})
    conf.update(overrides)
    for key, value in (flags or {}).items():
        if value is None:
            continue
        if key in overrides and overrides[key] != value:
            raise UsageError(f"conflicting values for {key!r}: flag gives {value!r}, --set gives {overrides[key]!r}")
        conf[key] = value
    _check_keys(conf)
    return conf


def format_resolved(conf: Mapping[str, object]) -> str:
    return "\n".join(f"{k} = {json.dumps(v)}" for k, v in sorted(conf.items()))


def _get(conf, key, kind=float):
    if key not in conf:
        raise UsageError(f"missing required key {key!r}")
    try:
        return kind(conf[key])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{key}: cannot interpret {conf[key]!r} as {kind.__name__}") from exc


def build_sbm(conf: Mapping[str, object]) -> BlockModelParams | None:
    if "sbm.n" not in conf:
        return None
    rho = conf.get("sbm.rho")
    if not isinstance(rho, list):
        raise UsageError("sbm.rho must be a list of block fractions")
    try:
        return BlockModelParams(
            _get(conf, "sbm.n", int), _get(conf, "sbm.b", int), _get(conf, "sbm.p_in"), _get(conf, "sbm.p_out"),
            tuple(float(r) for r in rho),
        )
    except ParameterError as exc:
        raise UsageError(f"sbm: {exc}") from exc


def load_graph(conf: Mapping[str, object]) -> Graph | None:
    if "graph.file" not in conf:
        return None
    try:
        return Graph.load(str(conf["graph.file"]))
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"graph.file: cannot load {conf['graph.file']}: {exc}") from exc


def _seed_fractions(conf) -> dict[tuple[int, int], float]:
    out = {}
    for key, value in conf.items():
        m = _SEED_KEY.match(key)
        if m:
            out[(int(m.group(1)) - 1, int(m.group(2)) - 1)] = float(value)
    return out


def _whole_blocks(conf, n_blocks: int) -> dict[int, int]:
    explicit = {int(m.group(1)) - 1: int(v) - 1 for k, v in conf.items() if (m := _WHOLE_KEY.match(k))}
    if explicit:
        return explicit
    if str(conf.get("scenario.whole_block_seeds", "")).lower() == "none":
        return {}
    return {i: i for i in range(n_blocks - 1)}


def _check_capacity(seeds: Mapping[tuple[int, int], float], sizes: np.ndarray, n: int) -> None:
    per_block: dict[int, float] = {}
    for (b, _), v in seeds.items():
        if not 0 <= b < len(sizes):
            raise UsageError(f"scenario.block_seed_fractions.{b + 1}: block {b + 1} does not exist")
        per_block[b] = per_block.get(b, 0.0) + v
    for b, total in per_block.items():
        if total > sizes[b] / n + 1e-12:
            raise UsageError(
                f"scenario.block_seed_fractions.{b + 1}: seed fractions sum to {total:g}, "
                f"more than block {b + 1} holds ({sizes[b] / n:g} of n)"
            )


def graph_shape(conf) -> tuple[int, np.ndarray]:
    """(n, block sizes) of the configured graph source."""
    sbm = build_sbm(conf)
    if sbm is not None:
        if "graph.file" in conf:
            raise UsageError("give either sbm.* keys or graph.file, not both")
        return sbm.n, sbm.block_sizes()
    g = load_graph(conf)
    if g is None:
        raise UsageError("missing graph: set sbm.* keys, graph.file, or a preset")
    return g.n, g.block_sizes


def build_scenario(conf: Mapping[str, object]) -> ScenarioConfig:
    n, sizes = graph_shape(conf)
    n_blocks = len(sizes)
    seeds = _seed_fractions(conf)
    _check_capacity(seeds, sizes, n)
    K = _get(conf, "scenario.K", int) if "scenario.K" in conf else n_blocks - 1
    early = None
    if conf.get("scenario.early_stop", True):
        window = conf.get("scenario.window")
        early = (_get(conf, "scenario.eps_stop"), int(window) if window is not None else None)
    ppv = conf.get("scenario.initial_ppv")
    stride = conf.get("scenario.stride")
    rebuild = conf.get("scenario.rebuild_every")
    try:
        return ScenarioConfig(
            K=K,
            theta=_get(conf, "scenario.theta"),
            T=_get(conf, "scenario.T"),
            beta=_get(conf, "scenario.beta"),
            initial_ppv=tuple(ppv) if ppv is not None else None,
            block_seed_fractions=seeds,
            whole_block_seeds=_whole_blocks(conf, n_blocks),
            rng_seed=_get(conf, "scenario.seed", int),
            early_stop=early,
            stride=int(stride) if stride is not None else None,
            rebuild_every=int(rebuild) if rebuild is not None else None,
        )
    except ParameterError as exc:
        raise UsageError(f"scenario: {exc}") from exc


def build_meanfield(conf: Mapping[str, object]) -> tuple[MeanFieldScenario, int]:
    """Mean-field scenario plus the 0-based candidate whose threshold is wanted."""
    params = build_sbm(conf)
    if params is None:
        g = load_graph(conf)
        if g is None:
            raise UsageError("missing graph: set sbm.* keys, graph.file, or a preset")
        est = estimate_block_probs(g, str(conf.get("sweep.estimator", "pair")))
        params = BlockModelParams(g.n, g.n_blocks, est.p_in_hat, est.p_out_hat, est.rho_hat)
    b = params.b
    seeds = [0.0] * (b - 1)
    for (blk, k), v in _seed_fractions(conf).items():
        if blk != b - 1:
            raise UsageError(
                f"scenario.block_seed_fractions.{blk + 1}.{k + 1}: mean-field theory only places seeds in the last block"
            )
        if not 0 <= k < b - 1:
            raise UsageError(f"scenario.block_seed_fractions.{blk + 1}.{k + 1}: candidate out of range")
        seeds[k] = v
    _check_capacity({(b - 1, k): v for k, v in enumerate(seeds)}, np.asarray(params.rho) * params.n, params.n)
    k_star = _get(conf, "threshold.k_star", int) - 1
    if not 0 <= k_star < b - 1:
        raise UsageError(f"threshold.k_star must be between 1 and {b - 1}")
    ppv = conf.get("scenario.initial_ppv")
    try:
        sc = MeanFieldScenario(
            params,
            _get(conf, "scenario.beta"),
            _get(conf, "scenario.theta"),
            tuple(seeds),
            tuple(ppv) if ppv is not None else None,
            _whole_blocks(conf, b),
        )
    except ParameterError as exc:
        raise UsageError(f"mean-field scenario: {exc}") from exc
    return sc, k_star


def _axis(conf, name: str) -> Axis | None:
    spec = conf.get(f"sweep.{name}")
    if spec is None:
        return None
    m = re.match(r"^(?:scenario\.)?block_seed_fractions\.(\d+)\.(\d+)$", str(spec))
    if not m:
        raise UsageError(f"sweep.{name}: expected 'block_seed_fractions.<block>.<candidate>', got {spec!r}")
    values = conf.get(f"sweep.{name}_values")
    rng = conf.get(f"sweep.{name}_range")
    if (values is None) == (rng is None):
        raise UsageError(f"sweep.{name}: give exactly one of sweep.{name}_values or sweep.{name}_range")
    if rng is not None:
        if not isinstance(rng, list) or len(rng) != 3 or float(rng[2]) <= 0:
            raise UsageError(f"sweep.{name}_range must be [start, stop, step] with step > 0")
        start, stop, step = (float(x) for x in rng)
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = np.round(start + step * np.arange(count), 12).tolist()
    if not values:
        raise UsageError(f"sweep.{name}: grid is empty")
    return Axis(int(m.group(1)) - 1, int(m.group(2)) - 1, tuple(float(v) for v in values))


def build_sweep(conf: Mapping[str, object]) -> SweepSpec:
    axis1 = _axis(conf, "axis1")
    if axis1 is None:
        raise UsageError("missing required key 'sweep.axis1'")
    axis2 = _axis(conf, "axis2")
    base = dict(conf)
    # the swept entries only need to fit at each grid point, not at the base value
    for ax in (axis1, axis2):
        if ax is not None:
            base.pop(f"scenario.block_seed_fractions.{ax.block + 1}.{ax.candidate + 1}", None)
    scenario = build_scenario(base)
    betas = conf.get("sweep.betas", [conf["scenario.beta"]])
    if not isinstance(betas, list) or not betas:
        raise UsageError("sweep.betas must be a nonempty list")
    if axis2 is not None and len(betas) != 1:
        raise UsageError("sweep.betas: a two-axis sweep takes exactly one beta")
    sbm = build_sbm(conf)
    graph = None if sbm is not None else load_graph(conf)
    workers = conf.get("sweep.workers")
    k_star = conf.get("sweep.k_star")
    try:
        return SweepSpec(
            scenario=scenario,
            axis1=axis1,
            axis2=axis2,
            betas=tuple(float(b) for b in betas),
            replicas=_get(conf, "sweep.replicas", int),
            master_seed=_get(conf, "sweep.seed", int),
            sbm=sbm,
            graph=graph,
            workers=int(workers) if workers is not None else None,
            k_star=int(k_star) - 1 if k_star is not None else None,
            estimator=str(conf.get("sweep.estimator", "pair")),
            engine=str(conf.get("scenario.engine", "numba")),
        )
    except ParameterError as exc:
        raise UsageError(f"sweep: {exc}") from exc
