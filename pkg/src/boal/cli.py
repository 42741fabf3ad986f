"""Command-line entry point: bench | run | scores | serve.

All commands take a YAML config (see ``RunConfig``); every run is a pure
function of the config's seeds, so repeated invocations write identical
outputs. The run/scores report paths write a results CSV, a JSON summary,
and PNG figures into the output directory, and print the budget-grouped
grid to stdout.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from . import bench, report
from .bench import BenchmarkProblem, StreamSpec, SyntheticFamily
from .engine import BASE, EngineConfig, canonical_strategy
from .ensemble import LossSpec
from .errors import ConfigError, ParseError, ValidationError
from .evaluation import ProtocolSpec, run_protocol

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


@dataclass
class AdvisorSettings:
    host: str = "127.0.0.1"
    port: int = 8777
    horizon: int = 200
    budget: int = 4
    strategy: str = "ets"
    session_dir: Optional[str] = None


@dataclass
class RunConfig:
    """Structured run configuration; field names are part of the interface."""

    problem_kind: str = "synthetic"  # or "csv"
    stream: StreamSpec = field(default_factory=StreamSpec)
    family: SyntheticFamily = field(default_factory=SyntheticFamily)
    n_prior: int = 36
    n_eval: int = 37
    csv_prior_episodes: Optional[str] = None
    csv_eval_episodes: Optional[str] = None
    csv_expert_traces: Optional[str] = None
    strategies: tuple = ("base", "uni", "sa", "psa", "ets")
    budgets: tuple = (2, 3, 4, 10)
    eta: float = 1.0
    loss: LossSpec = field(default_factory=LossSpec)
    ets_grid_size: int = 50
    score: str = "variance"
    rmse_mode: str = "online"
    prior_policy: str = "leave_one_out"
    prior_cap: Optional[int] = None
    runs_per_setting: Optional[int] = None
    alpha: float = 0.05
    output_dir: str = "out"
    advisor: AdvisorSettings = field(default_factory=AdvisorSettings)

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            eta=self.eta,
            loss=self.loss,
            ets_grid_size=self.ets_grid_size,
            score_kind=self.score,
            prior_cap=self.prior_cap,
        )

    def protocol_spec(self, strategies=None, include_max=False) -> ProtocolSpec:
        return ProtocolSpec(
            budgets=tuple(self.budgets),
            strategies=tuple(strategies if strategies is not None else self.strategies),
            runs_per_setting=self.runs_per_setting,
            prior_policy=self.prior_policy,
            include_max_oracle=include_max,
            rmse_mode=self.rmse_mode,
            alpha=self.alpha,
            engine=self.engine_config(),
        )

    def to_dict(self) -> dict:
        data = asdict(self)
        data["stream"] = asdict(self.stream)
        data["family"] = dict(asdict(self.family), theta=list(self.family.theta))
        data["loss"] = asdict(self.loss)
        data["advisor"] = asdict(self.advisor)
        data["strategies"] = list(self.strategies)
        data["budgets"] = list(self.budgets)
        return data


def _build(section: dict, cls, name: str):
    try:
        return cls(**section)
    except TypeError as exc:
        raise ConfigError(f"config section {name!r}: {exc}") from None
    except ValidationError as exc:
        raise ConfigError(f"config section {name!r}: {exc}") from None


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    data = dict(data)
    kwargs = {}
    for section, cls in (
        ("stream", StreamSpec),
        ("family", SyntheticFamily),
        ("loss", LossSpec),
        ("advisor", AdvisorSettings),
    ):
        if section in data:
            raw = data.pop(section) or {}
            if section == "family" and "theta" in raw:
                raw = dict(raw, theta=tuple(raw["theta"]))
            kwargs[section] = _build(raw, cls, section)
    for key in ("strategies", "budgets"):
        if key in data:
            kwargs[key] = tuple(data.pop(key))
    known = set(RunConfig.__dataclass_fields__)
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config field {key!r}")
        kwargs[key] = value
    cfg = _build(kwargs, RunConfig, "root")
    if cfg.problem_kind not in ("synthetic", "csv"):
        raise ConfigError(f"problem_kind must be 'synthetic' or 'csv', got {cfg.problem_kind!r}")
    _validate_paths(cfg)
    return cfg


def _validate_paths(cfg: RunConfig) -> None:
    if cfg.problem_kind != "csv":
        return
    for name in ("csv_eval_episodes", "csv_expert_traces"):
        value = getattr(cfg, name)
        if value is None:
            raise ConfigError(f"csv problems require the {name!r} field")
        if not Path(value).exists():
            raise ConfigError(f"{name}: path {value!r} does not exist")
    if cfg.csv_prior_episodes is not None and not Path(cfg.csv_prior_episodes).exists():
        raise ConfigError(f"csv_prior_episodes: path {cfg.csv_prior_episodes!r} does not exist")


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    data = yaml.safe_load(path.read_text()) or {}
    return config_from_dict(data)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))


def build_problem(cfg: RunConfig) -> BenchmarkProblem:
    if cfg.problem_kind == "synthetic":
        return bench.build_synthetic(
            cfg.stream, cfg.family, n_prior=cfg.n_prior, n_eval=cfg.n_eval
        )
    eval_pool = bench.load_episodes(cfg.csv_eval_episodes)
    if eval_pool.episodes[0].labels is None:
        raise ConfigError(
            f"{cfg.csv_eval_episodes}: evaluation episodes must carry a label column"
        )
    experts = bench.load_expert_traces(cfg.csv_expert_traces)
    prior = (
        bench.load_episodes(cfg.csv_prior_episodes)
        if cfg.csv_prior_episodes
        else None
    )
    return BenchmarkProblem(
        name=Path(cfg.csv_eval_episodes).stem,
        experts=experts,
        eval_episodes=list(eval_pool.episodes),
        prior_episodes=prior,
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_bench(cfg: RunConfig) -> int:
    if cfg.problem_kind != "synthetic":
        raise ConfigError("bench generates synthetic data; set problem_kind: synthetic")
    out = Path(cfg.output_dir)
    problem = build_problem(cfg)
    prior_eps = list(problem.prior_episodes.episodes) if problem.prior_episodes else []
    bench.write_episodes(prior_eps, out / "prior_episodes.csv", include_labels=False)
    bench.write_episodes(problem.eval_episodes, out / "eval_episodes.csv", include_labels=True)
    all_eps = prior_eps + list(problem.eval_episodes)
    for expert in problem.experts:
        bench.write_expert_trace(expert, all_eps, out / "experts" / f"{expert.id}.csv")
    bench.write_expert_trace(problem.target, all_eps, out / "experts" / "target.csv")
    print(
        f"wrote {len(prior_eps)} prior + {len(problem.eval_episodes)} eval episodes, "
        f"{len(problem.experts)} expert traces + 1 target trace to {out}"
    )
    return EXIT_OK


def cmd_run(cfg: RunConfig, jobs: int = 1) -> int:
    problem = build_problem(cfg)
    spec = cfg.protocol_spec(include_max=True)
    result = run_protocol(spec, problem, jobs=jobs)
    out = Path(cfg.output_dir)
    report.write_results_csv(result, out / "results.csv")
    report.write_summary_json(result, out / "summary.json")
    report.render_rmse_figure(result, out / "rmse_vs_budget.png")
    report.render_score_figure(result, out / "score_vs_budget.png")
    print(report.format_rmse_grid(result))
    print(f"\nresults written to {out}")
    return EXIT_OK


def cmd_scores(cfg: RunConfig, jobs: int = 1) -> int:
    problem = build_problem(cfg)
    strategies = [s for s in cfg.strategies if canonical_strategy(s) != BASE]
    spec = cfg.protocol_spec(strategies=strategies, include_max=True)
    result = run_protocol(spec, problem, jobs=jobs)
    out = Path(cfg.output_dir)
    report.write_results_csv(result, out / "scores.csv")
    report.write_summary_json(result, out / "scores_summary.json")
    report.render_score_figure(result, out / "score_vs_budget.png")
    print(report.format_score_grid(result))
    print(f"\nresults written to {out}")
    return EXIT_OK


def cmd_serve(cfg: RunConfig) -> int:
    import uvicorn

    from .advisor import advisor_from_config

    service = advisor_from_config(cfg)
    uvicorn.run(service.app, host=cfg.advisor.host, port=cfg.advisor.port)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="boal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_jobs in (
        ("bench", False),
        ("run", True),
        ("scores", True),
        ("serve", False),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", default=None, help="override output directory")
        if needs_jobs:
            p.add_argument(
                "--jobs",
                type=int,
                default=os.cpu_count() or 1,
                help="parallel protocol workers (default: processor count)",
            )
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.output_dir = args.out
        if args.command == "bench":
            return cmd_bench(cfg)
        if args.command == "run":
            return cmd_run(cfg, jobs=max(1, args.jobs))
        if args.command == "scores":
            return cmd_scores(cfg, jobs=max(1, args.jobs))
        if args.command == "serve":
            return cmd_serve(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
