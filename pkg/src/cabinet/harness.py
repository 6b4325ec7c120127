"""Experiment runner: scenario files, metrics CSV, paired comparisons.

A scenario is a JSON object naming the cluster shape, workload mix, delay
model, crash plans, and schedule knobs.  Explicit CLI flags override
scenario values, which override built-in defaults.  Each committed client
round yields one metrics row; a trailing comment block carries the summary
aggregates so the CSV stays machine-parseable.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .consensus import Algo, ClusterConfig
from .simnet import (
    CrashPlan,
    DelayModel,
    HeterogeneityProfile,
    LivelockError,
    LoadChange,
    Recovery,
    Simulation,
    suggest_election_timeouts,
)
from .trace import ExecutionTrace
from .verify import AuditViolation, audit_trace
from .weights import WeightScheme, generate_scheme, max_failure_threshold
from .workload import resolve_mix

__all__ = [
    "CSV_HEADER",
    "ConfigError",
    "EXIT_AUDIT_FAILED",
    "EXIT_CONFIG_ERROR",
    "EXIT_LIVELOCK",
    "EXIT_OK",
    "ExperimentResult",
    "MetricsRow",
    "PairedComparison",
    "Scenario",
    "compare_paired",
    "metrics_rows",
    "parse_crash_flag",
    "parse_delay_flag",
    "parse_threshold",
    "run_experiment",
    "run_scenario",
    "summarize",
    "write_csv",
]

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_AUDIT_FAILED = 3
EXIT_LIVELOCK = 4

SEED_ENV_VAR = "CABINET_SEED"


class ConfigError(ValueError):
    pass


def parse_threshold(spec, n: int) -> int:
    """Resolve a failure threshold given either an int or an "fX%" flag.

    Percent form uses t = max(1, round(x*n/100)) — Python round, i.e.
    half-to-even — capped at floor((n-1)/2).
    """
    cap = max_failure_threshold(n)
    if isinstance(spec, int):
        t = spec
    else:
        text = str(spec).strip().lower()
        if text.startswith("f") and text.endswith("%"):
            pct = float(text[1:-1])
            t = max(1, round(pct * n / 100))
            t = min(t, cap)
        else:
            t = int(text)
    if not 1 <= t <= cap:
        raise ConfigError(f"t={t} outside [1, {cap}] for n={n}")
    return t


def parse_delay_flag(text: str) -> DelayModel:
    """CLI delay forms: none | d1:<mean> | d2 | d3 | d4."""
    text = text.strip().lower()
    if text in ("", "none", "d0"):
        return DelayModel.none()
    if text.startswith("d1"):
        mean = 100.0
        if ":" in text:
            mean = float(text.split(":", 1)[1])
        return DelayModel.uniform(mean)
    if text == "d2":
        return DelayModel.skew()
    if text == "d3":
        return DelayModel.dynamic()
    if text == "d4":
        return DelayModel.burst()
    raise ConfigError(f"unknown delay flag {text!r}")


def parse_crash_flag(text: str) -> tuple[CrashPlan, ...]:
    """CLI crash form: none | {strong|weak|random}:<x>@<round>."""
    text = text.strip().lower()
    if text in ("", "none"):
        return ()
    try:
        strategy, rest = text.split(":", 1)
        x, round_no = rest.split("@", 1)
        return (CrashPlan(strategy, int(x), int(round_no)),)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad crash flag {text!r}: {exc}") from None


def _delay_from_spec(spec) -> DelayModel:
    if spec is None:
        return DelayModel.none()
    if isinstance(spec, DelayModel):
        return spec
    if isinstance(spec, str):
        return parse_delay_flag(spec)
    kind = spec.get("kind", "none")
    if kind == "none":
        return DelayModel.none()
    if kind == "uniform":
        return DelayModel.uniform(float(spec["mean"]), spec.get("half_width"))
    if kind == "skew":
        return DelayModel.skew(float(spec.get("hi_mean", 1000)), float(spec.get("lo_mean", 100)),
                               float(spec.get("hw_frac", 0.2)))
    if kind == "dynamic":
        return DelayModel.dynamic(float(spec.get("hi_mean", 1000)), float(spec.get("lo_mean", 100)),
                                  float(spec.get("hw_frac", 0.2)),
                                  int(spec.get("rotate_every_rounds", 10)))
    if kind == "burst":
        return DelayModel.burst(float(spec.get("spike_mean", 1000)),
                                float(spec.get("spike_half_width", 100)),
                                float(spec.get("on_ms", 5000)), float(spec.get("off_ms", 10000)))
    raise ConfigError(f"unknown delay kind {kind!r}")


def _profile_from_spec(spec, n: int, base_service_ms: float) -> HeterogeneityProfile:
    if isinstance(spec, HeterogeneityProfile):
        return spec
    if spec in (None, "heterogeneous"):
        return HeterogeneityProfile.heterogeneous(n, base_service_ms)
    if spec == "homogeneous":
        return HeterogeneityProfile.homogeneous(n, base_service_ms)
    zones = tuple((z, int(v), tuple(ids)) for z, v, ids in spec["zones"])
    return HeterogeneityProfile(zones, float(spec.get("base_service_ms", base_service_ms)),
                                int(spec.get("reference_vcpu", 4)))


def _crashes_from_spec(spec) -> tuple[CrashPlan, ...]:
    if not spec:
        return ()
    if isinstance(spec, str):
        return parse_crash_flag(spec)
    plans = []
    for item in spec:
        if isinstance(item, CrashPlan):
            plans.append(item)
        else:
            plans.append(CrashPlan(
                strategy=item["strategy"],
                x=int(item["x"]),
                trigger_round=int(item["round"]),
                stagger=int(item.get("stagger", 0)),
                include_leader=bool(item.get("include_leader", False)),
            ))
    return tuple(plans)


@dataclass(frozen=True)
class Scenario:
    """Fully resolved experiment description."""

    name: str = "experiment"
    algo: str = "cabinet"
    n: int = 5
    t: int | str = 1
    batch: int = 100
    rounds: int = 20
    seed: int | None = None
    mix: object = "A"
    profile: object = "heterogeneous"
    base_service_ms: float = 10.0
    delay: object = "none"
    crashes: object = ()
    election_timeout_ms: tuple[float, float] | None = None
    grace_factor: float = 2.0
    time_cap_ms: float | None = None
    reconfig: tuple[tuple[int, int], ...] = ()
    load_changes: tuple[LoadChange, ...] = ()
    recoveries: tuple[Recovery, ...] = ()
    kind_costs: dict | None = None
    weights: tuple[float, ...] | None = None

    @classmethod
    def from_dict(cls, obj: dict) -> "Scenario":
        known = {}
        for key in cls.__dataclass_fields__:
            if key in obj:
                known[key] = obj[key]
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        if "reconfig" in known:
            known["reconfig"] = tuple((int(r["round"]), int(r["t"])) for r in known["reconfig"])
        if "load_changes" in known:
            known["load_changes"] = tuple(
                LoadChange(int(c["round"]), int(c["node"]), float(c["factor"]))
                for c in known["load_changes"]
            )
        if "recoveries" in known:
            known["recoveries"] = tuple(
                Recovery(int(r["round"]), int(r["node"])) for r in known["recoveries"]
            )
        if "election_timeout_ms" in known and known["election_timeout_ms"] is not None:
            lo, hi = known["election_timeout_ms"]
            known["election_timeout_ms"] = (float(lo), float(hi))
        if "weights" in known and known["weights"] is not None:
            known["weights"] = tuple(float(w) for w in known["weights"])
        return cls(**known)

    @classmethod
    def from_file(cls, path) -> "Scenario":
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load scenario {path}: {exc}") from None
        return cls.from_dict(obj)

    def with_overrides(self, **overrides) -> "Scenario":
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean) if clean else self

    def resolved_seed(self) -> int:
        if self.seed is not None:
            return int(self.seed)
        env = os.environ.get(SEED_ENV_VAR)
        if env is not None:
            return int(env)
        return 0

    def build(self) -> Simulation:
        algo = Algo(self.algo) if not isinstance(self.algo, Algo) else self.algo
        t = parse_threshold(self.t, self.n)
        if algo is Algo.CABINET:
            if self.weights is not None:
                scheme = WeightScheme(n=self.n, t=t, ratio=None, weights=self.weights,
                                      ct=math.fsum(self.weights) / 2)
            else:
                scheme = generate_scheme(self.n, t)
        else:
            scheme = None
        profile = _profile_from_spec(self.profile, self.n, self.base_service_ms)
        delays = _delay_from_spec(self.delay)
        max_load = max((c.factor for c in self.load_changes), default=1.0)
        timeouts = self.election_timeout_ms or suggest_election_timeouts(
            profile, delays, self.grace_factor, max_load
        )
        config = ClusterConfig(
            n=self.n, t=t, scheme=scheme, election_timeout_range=timeouts, algo=algo
        )
        return Simulation(
            config,
            profile,
            delays,
            _crashes_from_spec(self.crashes),
            mix=resolve_mix(self.mix),
            batch_size=self.batch,
            seed=self.resolved_seed(),
            rounds=self.rounds,
            grace_factor=self.grace_factor,
            time_cap_ms=self.time_cap_ms,
            reconfig_schedule=self.reconfig,
            load_changes=self.load_changes,
            recoveries=self.recoveries,
            kind_costs=self.kind_costs,
        )


# ------------------------------------------------------------------- metrics

CSV_HEADER = (
    "round,wclock,algo,commit_latency_ms,throughput_ops_per_s,"
    "quorum_replies_counted,cabinet_ids,leader_id,active_delay_regime,crashed_count"
)


@dataclass(frozen=True)
class MetricsRow:
    round: int
    wclock: int
    algo: str
    commit_latency_ms: float
    throughput_ops_per_s: float
    quorum_replies_counted: int
    cabinet_ids: tuple[int, ...]
    leader_id: int
    active_delay_regime: str
    crashed_count: int

    def as_csv(self) -> str:
        cab = "|".join(str(i) for i in self.cabinet_ids)
        return (
            f"{self.round},{self.wclock},{self.algo},{self.commit_latency_ms!r},"
            f"{self.throughput_ops_per_s!r},{self.quorum_replies_counted},{cab},"
            f"{self.leader_id},{self.active_delay_regime},{self.crashed_count}"
        )


def metrics_rows(trace: ExecutionTrace) -> list[MetricsRow]:
    rows = []
    for stats in trace.rounds:
        if stats.kind != "client" or not stats.committed:
            continue
        wall = max(stats.wall_time_ms, 1e-9)
        rows.append(MetricsRow(
            round=stats.round,
            wclock=stats.wclock,
            algo=trace.algo,
            commit_latency_ms=stats.commit_latency_ms,
            throughput_ops_per_s=stats.batch_size / (wall / 1000.0),
            quorum_replies_counted=stats.replies_at_commit,
            cabinet_ids=stats.cabinet_ids,
            leader_id=stats.leader_id,
            active_delay_regime=stats.regime,
            crashed_count=stats.crashed_count,
        ))
    return rows


def _p99(values: list[float]) -> float:
    ordered = sorted(values)
    return ordered[max(0, math.ceil(0.99 * len(ordered)) - 1)]


def summarize(rows: list[MetricsRow]) -> dict:
    if not rows:
        return {"rounds": 0}
    latencies = [r.commit_latency_ms for r in rows]
    churn = sum(
        1 for a, b in zip(rows, rows[1:]) if a.cabinet_ids != b.cabinet_ids
    )
    return {
        "rounds": len(rows),
        "mean_commit_latency_ms": math.fsum(latencies) / len(latencies),
        "p99_commit_latency_ms": _p99(latencies),
        "mean_throughput_ops_per_s": math.fsum(r.throughput_ops_per_s for r in rows) / len(rows),
        "cabinet_churn": churn,
    }


def write_csv(rows: list[MetricsRow], out_path, summary: dict | None = None) -> None:
    lines = [CSV_HEADER]
    lines.extend(r.as_csv() for r in rows)
    if summary is None:
        summary = summarize(rows)
    for key in sorted(summary):
        value = summary[key]
        lines.append(f"# {key}={value!r}" if isinstance(value, float) else f"# {key}={value}")
    Path(out_path).write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------- experiments


@dataclass
class ExperimentResult:
    exit_code: int
    scenario: Scenario
    trace: ExecutionTrace | None = None
    rows: list[MetricsRow] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    violations: list[AuditViolation] = field(default_factory=list)
    error: str | None = None


def run_scenario(scenario: Scenario) -> ExecutionTrace:
    return scenario.build().run()


def run_experiment(scenario_path, out_path=None, overrides: dict | None = None,
                   figures_dir=None) -> ExperimentResult:
    """Execute one scenario end to end: simulate, audit, emit CSV.

    Nonzero exit codes: 2 config error, 3 audit violation, 4 livelock.
    Figures are rendered (alongside the CSV) only when figures_dir is set.
    """
    try:
        scenario = (
            scenario_path if isinstance(scenario_path, Scenario)
            else Scenario.from_file(scenario_path)
        )
        if overrides:
            scenario = scenario.with_overrides(**overrides)
        sim = scenario.build()
    except (ConfigError, ValueError) as exc:
        return ExperimentResult(EXIT_CONFIG_ERROR, scenario_path if isinstance(scenario_path, Scenario) else Scenario(), error=str(exc))

    try:
        trace = sim.run()
    except LivelockError as exc:
        result = ExperimentResult(EXIT_LIVELOCK, scenario, trace=exc.trace, error=str(exc))
        if out_path is not None and exc.trace is not None:
            rows = metrics_rows(exc.trace)
            write_csv(rows, out_path)
        return result

    rows = metrics_rows(trace)
    summary = summarize(rows)
    violations = audit_trace(trace)
    exit_code = EXIT_AUDIT_FAILED if violations else EXIT_OK
    if out_path is not None:
        write_csv(rows, out_path, summary)
        if figures_dir is not None:
            from .plots import render_metrics_figures

            render_metrics_figures(rows, figures_dir, stem=Path(out_path).stem)
    return ExperimentResult(exit_code, scenario, trace, rows, summary, violations)


@dataclass(frozen=True)
class PairedComparison:
    """Same-seed cabinet-vs-baseline run over one scenario."""

    scenario_name: str
    cabinet_summary: dict
    baseline_summary: dict
    cabinet_rows: list[MetricsRow]
    baseline_rows: list[MetricsRow]

    @property
    def cabinet_mean_latency(self) -> float:
        return self.cabinet_summary["mean_commit_latency_ms"]

    @property
    def baseline_mean_latency(self) -> float:
        return self.baseline_summary["mean_commit_latency_ms"]


def compare_paired(scenario: Scenario) -> PairedComparison:
    """Run the scenario under both algorithms with the same seed and
    delay streams so the comparison is paired, not independent."""
    cab = run_scenario(scenario.with_overrides(algo="cabinet"))
    base = run_scenario(scenario.with_overrides(algo="baseline"))
    cab_rows = metrics_rows(cab)
    base_rows = metrics_rows(base)
    return PairedComparison(
        scenario.name, summarize(cab_rows), summarize(base_rows), cab_rows, base_rows
    )
