"""Experiment runner and command-line interface.

Experiments are described by a YAML file, for example::

    games: [mp]
    parametrization: boltzmann
    algorithms: [nohd, sga, lola]
    etas: [0.1, 0.5, 1.0]
    init: {kind: probabilities, probabilities: [[0.86, 0.14], [0.14, 0.86]]}
    mode: {kind: exact}
    max_steps: 300
    convergence: {eps: 0.01, window: 10}
    seed: 0

Every run (game, algorithm, eta, start) writes a per-step CSV and one row
of ``summary.csv``.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from nohd import estim, gamecore, games, optim
from nohd.errors import ConfigError, DomainExitError, NohdError, NumericalError

DEFAULT_ETAS = (0.1, 0.5, 1.0)
TIMING_DIMS = (4, 16, 36, 64, 100, 144)
RUN_COLUMNS = ("step", "player", "action", "probability", "xi_norm", "branch", "cos_s", "cos_a")
SUMMARY_COLUMNS = ("game", "algorithm", "eta", "seed", "converged", "steps", "ms_per_update",
                   "start", "domain_exit", "run_file")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


# configuration ----------------------------------------------------------------


@dataclass(frozen=True)
class InitSpec:
    """Initial condition: ``default``, ``probabilities``, ``theta`` or ``random``."""

    kind: str = "default"
    probabilities: tuple | None = None
    theta: tuple | None = None
    sigma: float = 0.5
    count: int = 1


@dataclass(frozen=True)
class ModeSpec:
    kind: str = "exact"
    batch_size: int = 300
    horizon: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    games: tuple[str, ...] = ("mp",)
    game_file: str | None = None
    parametrization: str | None = None
    algorithms: tuple[str, ...] = ("nohd",)
    hyper: dict = field(default_factory=dict)
    nohd: dict = field(default_factory=dict)
    etas: tuple[float, ...] = DEFAULT_ETAS
    init: InitSpec = InitSpec()
    mode: ModeSpec = ModeSpec()
    max_steps: int = 300
    eps: float = 0.01
    window: int = 10
    stop_on_convergence: bool = True
    seed: int = 0
    record_timing: bool = False
    jobs: int = 1


_TOP_FIELDS = {"games", "game", "game_file", "parametrization", "algorithms", "hyper", "nohd",
               "etas", "init", "mode", "max_steps", "convergence", "stop_on_convergence", "seed",
               "record_timing", "jobs"}


def _key_lines(text: str) -> dict[str, int]:
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value}


def parse_config(doc, source: str = "<config>", lines: dict[str, int] | None = None) -> ExperimentConfig:
    """Validate a parsed mapping into an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        Naming the offending field (and its line, when known).
    """
    lines = lines or {}

    def fail(key, msg):
        where = f"{source}:{lines[key]}" if key in lines else source
        raise ConfigError(f"{where}: field '{key}': {msg}")

    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: expected a mapping at top level")
    unknown = sorted(set(doc) - _TOP_FIELDS)
    if unknown:
        fail(unknown[0], f"unknown field (allowed: {', '.join(sorted(_TOP_FIELDS))})")

    kw = {}
    if "game" in doc and "games" in doc:
        fail("games", "give either 'game' or 'games'")
    if "game_file" in doc:
        if "game" in doc or "games" in doc:
            fail("game_file", "cannot be combined with 'game'/'games'")
        kw["game_file"] = str(doc["game_file"])
        kw["games"] = ()
    else:
        key = "games" if "games" in doc else "game"
        names = doc.get(key, ["mp"])
        names = [names] if isinstance(names, str) else names
        if not isinstance(names, list) or not names:
            fail(key, "must name at least one game")
        try:
            kw["games"] = tuple(games.canonical_name(n) for n in names)
        except ConfigError as exc:
            fail(key, str(exc))

    if "parametrization" in doc:
        try:
            kw["parametrization"] = games.Parametrization.parse(doc["parametrization"]).value
        except ConfigError as exc:
            fail("parametrization", str(exc))

    algs = doc.get("algorithms", ["nohd"])
    algs = [algs] if isinstance(algs, str) else algs
    if not isinstance(algs, list) or not algs:
        fail("algorithms", "algorithm list is empty")
    algs = [str(a).lower() for a in algs]
    bad = [a for a in algs if a not in optim.ALGORITHMS]
    if bad:
        fail("algorithms", f"unknown algorithm {bad[0]!r} (choose from {', '.join(optim.ALGORITHMS)})")
    kw["algorithms"] = tuple(algs)

    hyper = doc.get("hyper", {}) or {}
    if not isinstance(hyper, dict) or any(k not in optim.ALGORITHMS for k in hyper):
        fail("hyper", "must map algorithm names to hyperparameter mappings")
    kw["hyper"] = {k: dict(v or {}) for k, v in hyper.items()}

    nohd = doc.get("nohd", {}) or {}
    allowed = {"m", "ham_grad_floor", "apply_eta_to_hamiltonian_branch", "fixed_point_tol"}
    if not isinstance(nohd, dict) or set(nohd) - allowed:
        fail("nohd", f"allowed keys are {sorted(allowed)}")
    try:
        optim.NohdConfig(**nohd)
    except (TypeError, NohdError) as exc:
        fail("nohd", str(exc))
    kw["nohd"] = dict(nohd)

    etas = doc.get("etas", list(DEFAULT_ETAS))
    etas = [etas] if isinstance(etas, (int, float)) else etas
    if not isinstance(etas, list) or not etas or not all(
            isinstance(e, (int, float)) and e > 0 for e in etas):
        fail("etas", "must be a non-empty list of positive numbers")
    kw["etas"] = tuple(float(e) for e in etas)

    init = doc.get("init", {"kind": "default"}) or {}
    if not isinstance(init, dict):
        fail("init", "must be a mapping")
    kind = init.get("kind", "default")
    if kind not in ("default", "probabilities", "theta", "random"):
        fail("init", f"unknown kind {kind!r}")
    sigma = float(init.get("sigma", 0.5))
    count = init.get("count", 1)
    if kind == "random" and not sigma > 0:
        fail("init", "sigma must be positive for random starts")
    if not isinstance(count, int) or count < 1:
        fail("init", "count must be a positive integer")
    if kind == "probabilities" and "probabilities" not in init:
        fail("init", "kind 'probabilities' needs a 'probabilities' list")
    if kind == "theta" and "theta" not in init:
        fail("init", "kind 'theta' needs a 'theta' list")
    kw["init"] = InitSpec(kind, init.get("probabilities"), init.get("theta"), sigma,
                          count if kind == "random" else 1)

    mode = doc.get("mode", {"kind": "exact"}) or {}
    if isinstance(mode, str):
        mode = {"kind": mode}
    mkind = mode.get("kind", "exact")
    if mkind not in ("exact", "sampled"):
        fail("mode", f"unknown kind {mkind!r}")
    m, t = mode.get("batch_size", 300), mode.get("horizon", 1)
    if not (isinstance(m, int) and m >= 1 and isinstance(t, int) and t >= 1):
        fail("mode", "batch_size and horizon must be positive integers")
    kw["mode"] = ModeSpec(mkind, m, t)

    for key in ("max_steps", "seed", "jobs"):
        if key in doc:
            val = doc[key]
            if not isinstance(val, int) or isinstance(val, bool) or val < (1 if key != "seed" else 0):
                fail(key, "must be a positive integer" if key != "seed" else "must be a non-negative integer")
            kw[key] = val

    conv = doc.get("convergence", {}) or {}
    if not isinstance(conv, dict) or set(conv) - {"eps", "window"}:
        fail("convergence", "allowed keys are eps, window")
    eps, window = float(conv.get("eps", 0.01)), conv.get("window", 10)
    if not eps > 0 or not isinstance(window, int) or window < 1:
        fail("convergence", "eps must be positive and window a positive integer")
    kw["eps"], kw["window"] = eps, window

    for key in ("stop_on_convergence", "record_timing"):
        if key in doc:
            if not isinstance(doc[key], bool):
                fail(key, "must be true or false")
            kw[key] = doc[key]
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ConfigError(f"{where}: {getattr(exc, 'problem', exc)}") from None
    return parse_config(doc, str(path), _key_lines(text))


# convergence ------------------------------------------------------------------


def convergence_check(probs, reference, eps: float = 0.01, window: int = 10) -> tuple[bool, int | None]:
    """First step from which all distributions stay within ``eps`` for ``window`` steps.

    ``probs[t]`` is the concatenation of all players' action distributions
    at step ``t``; ``reference`` is the same for the equilibrium. Distance
    is the max-norm.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    ref = np.concatenate([np.ravel(r) for r in reference]) if isinstance(reference, (list, tuple)) \
        else np.asarray(reference, dtype=float)
    inside = np.max(np.abs(probs - ref), axis=1) < eps
    run = 0
    for t, ok in enumerate(inside):
        run = run + 1 if ok else 0
        if run >= window:
            return True, t - window + 1
    return False, None


class ConvergenceMonitor:
    """Stop rule for :func:`nohd.optim.run` implementing :func:`convergence_check` online."""

    def __init__(self, game, reference, eps: float = 0.01, window: int = 10):
        self.game = game
        self.ref = np.concatenate([np.ravel(r) for r in reference])
        self.eps = eps
        self.window = window
        self.run = 0

    def __call__(self, trace: optim.Trace) -> bool:
        p = np.concatenate(self.game.probabilities(trace.records[-1].theta))
        self.run = self.run + 1 if np.max(np.abs(p - self.ref)) < self.eps else 0
        return self.run >= self.window


# running ----------------------------------------------------------------------


@dataclass
class RunRecord:
    game: str
    algorithm: str
    eta: float
    seed: int
    start: int
    converged: bool
    steps: int | None
    n_updates: int
    seconds: float
    domain_exit: int | None
    rows: list = field(default_factory=list, repr=False)

    @property
    def ms_per_update(self) -> float:
        return 1000.0 * self.seconds / max(self.n_updates, 1)

    @property
    def run_file(self) -> str:
        return f"runs/{self.game}_{self.algorithm}_eta{self.eta:g}_start{self.start}.csv"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "" if np.isnan(x) else repr(x)
    return str(x)


def _trace_rows(game, trace: optim.Trace) -> list[tuple]:
    rows = []
    for rec in trace.records:
        upd = rec.update
        branch = upd.branch.value if upd is not None and upd.branch is not None else ""
        cos_s = upd.cos_s if upd is not None else float("nan")
        cos_a = upd.cos_a if upd is not None else float("nan")
        for i, p in enumerate(game.probabilities(rec.theta)):
            for a, prob in enumerate(p):
                rows.append((rec.step, i + 1, a + 1, float(prob), rec.xi_norm, branch,
                             float(cos_s), float(cos_a)))
    return rows


def build_game(cfg: ExperimentConfig, name: str | None):
    """Game and its default start (``None`` when it has none)."""
    if cfg.game_file is not None:
        return games.load_game_file(cfg.game_file, cfg.parametrization)
    game = games.builtin_game(name, cfg.parametrization or "boltzmann")
    return game, game.theta_from_probabilities(games.DEFAULT_STARTS[name])


def initial_points(cfg: ExperimentConfig, game, default_theta) -> np.ndarray:
    n = sum(game.block_sizes)
    init = cfg.init
    if init.kind == "random":
        rng = np.random.default_rng(cfg.seed)
        return rng.normal(0.0, init.sigma, size=(init.count, n))
    if init.kind == "probabilities":
        try:
            return game.theta_from_probabilities(init.probabilities)[None, :]
        except NohdError as exc:
            raise ConfigError(f"field 'init': {exc}") from None
    if init.kind == "theta":
        theta = np.asarray(init.theta, dtype=float).reshape(-1)
        if theta.size != n:
            raise ConfigError(f"field 'init': theta needs {n} values for this game")
        return theta[None, :]
    if default_theta is None:
        raise ConfigError("field 'init': the game has no default start; give one explicitly")
    return np.asarray(default_theta, dtype=float)[None, :]


def _reference(game):
    try:
        return games.nash_reference(game)
    except ConfigError:
        raise ConfigError(f"game {game.name!r} has no reference equilibrium; "
                          "convergence cannot be measured") from None


@dataclass(frozen=True)
class _Task:
    cfg: ExperimentConfig
    game: games.MatrixGame
    algorithm: str
    eta: float
    start: int
    theta0: np.ndarray
    keep_rows: bool


def _execute(task: _Task) -> RunRecord:
    cfg, game = task.cfg, task.game
    ref = _reference(game)
    nohd_cfg = optim.NohdConfig(eta=task.eta, **cfg.nohd)
    hyper = cfg.hyper.get(task.algorithm, {})
    evaluator = None
    if cfg.mode.kind == "sampled":
        evaluator = estim.sampled_evaluator(game, cfg.mode.batch_size, cfg.mode.horizon,
                                            seed=[cfg.seed, task.start])
    monitor = ConvergenceMonitor(game, ref, cfg.eps, cfg.window) if cfg.stop_on_convergence else None
    exit_step = None
    t0 = time.perf_counter()
    try:
        trace = optim.run(game, task.algorithm, task.theta0, cfg.max_steps, monitor, eta=task.eta,
                          nohd_config=nohd_cfg, evaluator=evaluator, **hyper)
    except DomainExitError as exc:
        trace, exit_step = exc.trace, exc.step
    seconds = time.perf_counter() - t0

    probs = np.array([np.concatenate(game.probabilities(r.theta)) for r in trace.records]) \
        if trace.records else np.zeros((0, sum(game.actions)))
    converged, step = convergence_check(probs, ref, cfg.eps, cfg.window) if len(probs) else (False, None)
    rows = _trace_rows(game, trace) if task.keep_rows else []
    return RunRecord(game.name, task.algorithm, task.eta, cfg.seed, task.start, converged, step,
                     trace.n_updates, seconds, exit_step, rows)


def _tasks(cfg: ExperimentConfig, keep_rows: bool) -> list[_Task]:
    tasks = []
    names = cfg.games if cfg.game_file is None else (None,)
    for name in names:
        game, default_theta = build_game(cfg, name)
        starts = initial_points(cfg, game, default_theta)
        for alg in cfg.algorithms:
            for eta in cfg.etas:
                for k, theta0 in enumerate(starts):
                    tasks.append(_Task(cfg, game, alg, eta, k, theta0, keep_rows))
    return tasks


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None) -> list[RunRecord]:
    """Run every (game, algorithm, eta, start) combination of ``cfg``.

    With ``out`` set, per-run CSVs go to ``out/runs/`` and the summary to
    ``out/summary.csv``. Results are returned in a fixed order regardless
    of ``cfg.jobs``.
    """
    tasks = _tasks(cfg, keep_rows=out is not None)
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            records = list(pool.map(_execute, tasks, chunksize=max(1, len(tasks) // (4 * cfg.jobs))))
    else:
        records = [_execute(t) for t in tasks]
    if out is not None:
        write_outputs(records, Path(out), cfg.record_timing)
    return records


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([[_fmt(x) for x in row] for row in rows])
    path.write_text(buf.getvalue())


def summary_rows(records: list[RunRecord], record_timing: bool = False) -> list[tuple]:
    return [(r.game, r.algorithm, r.eta, r.seed, str(r.converged).lower(), r.steps,
             r.ms_per_update if record_timing else None, r.start, r.domain_exit, r.run_file)
            for r in records]


def write_outputs(records: list[RunRecord], out: Path, record_timing: bool = False) -> None:
    for r in records:
        _write_csv(out / r.run_file, RUN_COLUMNS, r.rows)
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows(records, record_timing))


# studies ----------------------------------------------------------------------


@dataclass(frozen=True)
class AlgorithmScore:
    game: str
    algorithm: str
    best_eta: float
    mean_steps: float
    converged_runs: int
    n_runs: int
    ratio: float
    flagged: bool


def best_eta_scores(records: list[RunRecord], max_steps: int) -> dict[tuple[str, str], tuple[float, float, int, int]]:
    """Per (game, algorithm): ``(best eta, mean steps, converged, runs)``.

    Non-converged runs count as ``max_steps``; the best eta has the
    smallest mean (ties go to the earlier eta in sorted order).
    """
    grouped: dict[tuple[str, str], dict[float, list[RunRecord]]] = {}
    for r in records:
        grouped.setdefault((r.game, r.algorithm), {}).setdefault(r.eta, []).append(r)
    best = {}
    for key, by_eta in grouped.items():
        options = []
        for eta in sorted(by_eta):
            runs = by_eta[eta]
            steps = [r.steps if r.converged else max_steps for r in runs]
            options.append((float(np.mean(steps)), eta, sum(r.converged for r in runs), len(runs)))
        mean, eta, conv, n = min(options, key=lambda o: (o[0], o[1]))
        best[key] = (eta, mean, conv, n)
    return best


def table1_study(cfg: ExperimentConfig, out: str | Path | None = None) -> list[AlgorithmScore]:
    """Mean steps-to-converge per algorithm (best eta) relative to the slowest.

    ``ratio = mean / max(mean over algorithms)`` within each game; an
    algorithm is ``flagged`` when some of its runs at the best eta never
    converged (they count as ``max_steps``).
    """
    if cfg.init.kind != "random":
        raise ConfigError("field 'init': table1 needs random starts (kind: random)")
    records = run_experiment(cfg, out)
    best = best_eta_scores(records, cfg.max_steps)
    table = []
    for game in dict.fromkeys(r.game for r in records):
        rows = {alg: v for (g, alg), v in best.items() if g == game}
        worst = max(v[1] for v in rows.values())
        for alg in cfg.algorithms:
            eta, mean, conv, n = rows[alg]
            ratio = mean / worst if worst > 0 else 1.0
            table.append(AlgorithmScore(game, alg, eta, mean, conv, n, ratio, conv < n))
    if out is not None:
        _write_csv(Path(out) / "table1.csv",
                   ("game", "algorithm", "best_eta", "mean_steps", "converged_runs", "n_runs",
                    "ratio", "flagged"),
                   [(s.game, s.algorithm, s.best_eta, s.mean_steps, s.converged_runs, s.n_runs,
                     s.ratio, str(s.flagged).lower()) for s in table])
    return table


def time_update(game, algorithm: str, theta, reps: int = 20, eta: float = 0.1) -> float:
    """Mean wall time in ms of one full learning update.

    One update evaluates the game (gradients and Jacobian), decomposes
    the Jacobian and computes the algorithm's step.
    """
    update = optim.make_updater(algorithm, eta)
    theta = np.asarray(theta, dtype=float)
    ev = gamecore.evaluate(game, theta)
    update(ev, gamecore.decompose(ev))  # warm-up
    t0 = time.perf_counter()
    for _ in range(reps):
        ev = gamecore.evaluate(game, theta)
        update(ev, gamecore.decompose(ev))
    return 1000.0 * (time.perf_counter() - t0) / reps


def timing_study(dims=TIMING_DIMS, algorithms=optim.ALGORITHMS, reps: int = 20, seed: int = 0,
                 out: str | Path | None = None) -> list[dict]:
    """Per-update time of each algorithm on synthetic dense games of size ``dims``."""
    rows = []
    for dim in dims:
        game = games.random_game(int(dim), seed)
        theta = np.random.default_rng(seed).normal(0.0, 0.1, size=int(dim))
        row = {"dim": int(dim)}
        for alg in algorithms:
            row[alg] = time_update(game, alg, theta, reps)
        rows.append(row)
    if out is not None:
        _write_csv(Path(out) / "timing.csv", ("dim",) + tuple(algorithms),
                   [tuple(r[k] for k in ("dim",) + tuple(algorithms)) for r in rows])
    return rows


def estimator_errors(game, theta, batch_sizes=(100, 1000, 10000, 100000), seed: int = 0,
                     horizon: int = 1) -> list[tuple[int, float, float]]:
    """Max-norm errors of sampled ``xi`` and Jacobian against exact values."""
    exact = gamecore.evaluate(game, theta)
    env = estim.MatrixGameEnv(game, horizon)
    rows = []
    for k, m in enumerate(batch_sizes):
        batch = estim.sample_batch(env, theta, int(m), horizon, np.random.default_rng([seed, k]))
        est = estim.jacobian_estimate(game, batch)
        rows.append((int(m), float(np.max(np.abs(est.sim_grad - exact.sim_grad))),
                     float(np.max(np.abs(est.jacobian - exact.jacobian)))))
    return rows


# CLI --------------------------------------------------------------------------


def _print_summary(records: list[RunRecord], max_steps: int, stream) -> None:
    best = best_eta_scores(records, max_steps)
    stream.write(f"{'game':<10}{'algorithm':<10}{'best eta':>9}{'mean steps':>12}{'converged':>11}\n")
    for (game, alg), (eta, mean, conv, n) in best.items():
        stream.write(f"{game:<10}{alg:<10}{eta:>9g}{mean:>12.1f}{conv:>7}/{n:<3}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nohd", description="Newton optimization benchmarks for "
                                     "differentiable games.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="YAML experiment file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", default="results", help="output directory (default: results)")
        p.add_argument("--max-steps", type=int, help="override max_steps")
        p.add_argument("--jobs", type=int, help="parallel worker processes")

    common(sub.add_parser("run", help="run a single experiment as configured"))
    common(sub.add_parser("sweep", help="run over the eta grid and report the best eta"))
    common(sub.add_parser("table1", help="random-start convergence-ratio study"))
    common(sub.add_parser("estimators", help="experiment with sampled gradient estimates"))
    timing = sub.add_parser("timing", help="per-update timing on synthetic games")
    common(timing, config_required=False)
    timing.add_argument("--dims", type=int, nargs="+", default=list(TIMING_DIMS))
    timing.add_argument("--reps", type=int, default=20)
    return parser


def _overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.max_steps is not None:
        if args.max_steps < 1:
            raise ConfigError("--max-steps must be >= 1")
        changes["max_steps"] = args.max_steps
    if args.jobs is not None:
        changes["jobs"] = max(1, args.jobs)
    return replace(cfg, **changes)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.command == "timing":
            seed = args.seed if args.seed is not None else 0
            algs = optim.ALGORITHMS
            if args.config:
                cfg = _overrides(load_config(args.config), args)
                algs, seed = cfg.algorithms, cfg.seed
            rows = timing_study(args.dims, algs, args.reps, seed, out)
            for r in rows:
                print(" ".join([f"{r['dim']:>4}"] + [f"{a}={r[a]:.3f}ms" for a in algs]))
            return EXIT_OK

        cfg = _overrides(load_config(args.config), args)
        if args.command == "run":
            records = run_experiment(cfg, out)
            _print_summary(records, cfg.max_steps, sys.stdout)
        elif args.command == "sweep":
            if len(cfg.etas) < 2:
                cfg = replace(cfg, etas=DEFAULT_ETAS)
            records = run_experiment(cfg, out)
            best = best_eta_scores(records, cfg.max_steps)
            _write_csv(out / "sweep_best.csv", ("game", "algorithm", "best_eta", "mean_steps",
                                                "converged_runs", "n_runs"),
                       [(g, a) + v for (g, a), v in best.items()])
            _print_summary(records, cfg.max_steps, sys.stdout)
        elif args.command == "table1":
            table = table1_study(cfg, out)
            for s in table:
                flag = " (some runs never converged)" if s.flagged else ""
                print(f"{s.game:<6}{s.algorithm:<7} eta={s.best_eta:<4g} mean={s.mean_steps:8.1f} "
                      f"ratio={s.ratio:.2f}{flag}")
        elif args.command == "estimators":
            if cfg.mode.kind != "sampled":
                cfg = replace(cfg, mode=ModeSpec("sampled", cfg.mode.batch_size, cfg.mode.horizon))
            records = run_experiment(cfg, out)
            names = cfg.games if cfg.game_file is None else (None,)
            err_rows = []
            for name in names:
                game, theta0 = build_game(cfg, name)
                start = initial_points(cfg, game, theta0)[0]
                err_rows += [(game.name,) + r for r in estimator_errors(game, start, seed=cfg.seed)]
            _write_csv(out / "estimator_error.csv", ("game", "batch_size", "xi_error", "jacobian_error"),
                       err_rows)
            _print_summary(records, cfg.max_steps, sys.stdout)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NohdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
