"""CLI entry point for macroent."""
from __future__ import annotations

import json
import logging
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

import numpy as np
import typer
from rich.console import Console
from rich.logging import RichHandler

from config import settings
from macroent.core.adversary import PerturbationModel
from macroent.core.errors import MacroentError
from macroent.core.moments import WitnessMode
from macroent.core.optimizer import ObservableMode, optimize_ime, optimize_rme
from macroent.core.robustness import scenario_threshold, sweep as run_sweep
from macroent.core.storage import list_runs, record_run
from macroent.core.witness import NoiseKind, NoiseSpec, evaluate
from macroent.io.export import write_sweep_csv
from macroent.io.scenario_io import resolve_scenario, save_scenario, validation_report
from macroent.sim.sampling import Bipartition, RunConfig, estimate

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s :: %(message)s"

err_console = Console(stderr=True)
cli = typer.Typer(help="Macroscopic entanglement witness toolkit", pretty_exceptions_show_locals=False)
LOGGER = logging.getLogger("macroent.cli")


class TargetMode(str, Enum):
    IID = "iid"
    AVG = "avg"


class SweepParameter(str, Enum):
    Q = "q"
    LAMBDA = "lambda"
    P = "p"
    EPSILON = "epsilon"


class Target(str, Enum):
    RME = "rme"
    IME = "ime"


class StateFamily(str, Enum):
    FREE = "free"
    PHI_PLUS = "phi-plus"


def configure_logging(level: str, log_file: Optional[Path] = None) -> None:
    handlers: list[logging.Handler] = [
        RichHandler(console=err_console, show_path=False, rich_tracebacks=False)
    ]
    if log_file:
        log_file = Path(log_file).expanduser()
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handlers.append(file_handler)
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, handlers=handlers, force=True)


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Cannot serialise {type(value).__name__}")


def _dumps(payload: Any) -> str:
    return json.dumps(payload, default=_plain)


def _emit(command: str, params: Dict[str, Any], payload: Dict[str, Any], seed: Optional[int] = None) -> None:
    typer.echo(_dumps(payload))
    if settings.record_runs:
        record = record_run(command, json.loads(_dumps(params)), json.loads(_dumps(payload)), seed)
        LOGGER.info("Recorded %s run #%s", command, record.id)


@contextmanager
def _domain_errors() -> Iterator[None]:
    try:
        yield
    except MacroentError as exc:
        err_console.print(f"error: {exc}", style="red", markup=False, highlight=False)
        raise typer.Exit(code=3) from exc


def _model(exact: bool, positivity: bool, non_traceless: bool, starts: Optional[int], seed: Optional[int]) -> PerturbationModel:
    return PerturbationModel(
        traceless=not non_traceless,
        first_order=not exact,
        positivity=positivity,
        starts=starts if starts is not None else settings.adversary_starts,
        seed=seed,
    )


@cli.callback()
def main_options(
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads for sweeps and multi-start searches"),
    log_level: Optional[str] = typer.Option(None, "--log-level", help="Logging level for stderr diagnostics"),
    record: Optional[bool] = typer.Option(None, "--record/--no-record", help="Store each run in the SQLite ledger"),
) -> None:
    if threads is not None:
        settings.threads = threads
    if log_level is not None:
        settings.log_level = log_level.upper()
    if record is not None:
        settings.record_runs = record
    configure_logging(settings.log_level, settings.log_file)


@cli.command("witness")
def witness(
    scenario: str = typer.Option("rme", "--scenario", help="rme, ime or a scenario JSON file"),
    mode: WitnessMode = typer.Option(WitnessMode.IID, "--mode"),
    q: Optional[float] = typer.Option(None, "--q", help="Bipartition fraction for --mode q"),
    noise: NoiseKind = typer.Option(NoiseKind.NONE, "--noise"),
    level: float = typer.Option(0.0, "--level", help="Noise level: lambda, p or epsilon"),
    exact: bool = typer.Option(False, "--exact", help="Solve the POVM adversary without linearizing"),
    positivity: bool = typer.Option(False, "--positivity", help="Keep perturbed POVM elements positive"),
    non_traceless: bool = typer.Option(False, "--non-traceless", help="Allow perturbations with nonzero trace"),
    starts: Optional[int] = typer.Option(None, "--starts", min=1),
    seed: Optional[int] = typer.Option(None, "--seed"),
    check: bool = typer.Option(False, "--check", help="Exit 1 unless the witness is violated"),
) -> None:
    """Evaluate one witness form, optionally under noise."""

    seed = settings.resolve_seed(seed)
    with _domain_errors():
        pair = resolve_scenario(scenario)
        model = _model(exact, positivity, non_traceless, starts, seed) if noise is NoiseKind.POVM else None
        report = evaluate(pair, mode, NoiseSpec(noise, level), q, model)
    params = {"scenario": scenario, "mode": mode, "q": q, "noise": noise, "level": level, "exact": exact}
    _emit("witness", params, report.to_dict(), seed)
    if check and not report.violated:
        raise typer.Exit(code=1)


@cli.command("sweep")
def sweep(
    scenario: str = typer.Option("ime", "--scenario"),
    param: SweepParameter = typer.Option(SweepParameter.Q, "--param"),
    mode: TargetMode = typer.Option(TargetMode.IID, "--mode"),
    steps: int = typer.Option(101, "--steps"),
    lo: Optional[float] = typer.Option(None, "--lo"),
    hi: Optional[float] = typer.Option(None, "--hi"),
    out: Optional[Path] = typer.Option(None, "--out", help="CSV destination; without it the rows are included in the JSON output"),
    exact: bool = typer.Option(False, "--exact"),
    starts: Optional[int] = typer.Option(None, "--starts", min=1),
    seed: Optional[int] = typer.Option(None, "--seed"),
) -> None:
    """Tabulate f over q or a noise level."""

    seed = settings.resolve_seed(seed)
    with _domain_errors():
        pair = resolve_scenario(scenario)
        model = _model(exact, False, False, starts, seed) if param is SweepParameter.EPSILON else None
        table = run_sweep(pair, param.value, steps, mode.value, lo, hi, model)
    summary = table.summary()
    if out is None:
        summary["table"] = [{"param": x, "f": value} for x, value in table.rows()]
    else:
        summary["out"] = str(write_sweep_csv(table, out))
    params = {"scenario": scenario, "param": param, "mode": mode, "steps": steps, "lo": lo, "hi": hi}
    _emit("sweep", params, summary, seed)


@cli.command("threshold")
def threshold(
    scenario: str = typer.Option("rme", "--scenario"),
    mode: TargetMode = typer.Option(TargetMode.IID, "--mode"),
    noise: NoiseKind = typer.Option(NoiseKind.DEPOLARIZE, "--noise"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Bracket width at which bisection stops"),
    exact: bool = typer.Option(False, "--exact"),
    starts: Optional[int] = typer.Option(None, "--starts", min=1),
    seed: Optional[int] = typer.Option(None, "--seed"),
    check: bool = typer.Option(False, "--check", help="Exit 1 when the noiseless witness is not violated"),
) -> None:
    """Locate the noise level where the witness stops being violated."""

    seed = settings.resolve_seed(seed)
    params = {"scenario": scenario, "mode": mode, "noise": noise, "tol": tol, "exact": exact}
    with _domain_errors():
        pair = resolve_scenario(scenario)
        if check:
            baseline = evaluate(pair, mode.value)
            if not baseline.violated:
                _emit("threshold", params, baseline.to_dict(), seed)
                raise typer.Exit(code=1)
        model = _model(exact, False, False, starts, seed) if noise is NoiseKind.POVM else None
        result = scenario_threshold(pair, mode.value, noise, tol, model)
    _emit("threshold", params, result.to_dict(), seed)


@cli.command("optimize")
def optimize(
    target: Target = typer.Option(Target.RME, "--target"),
    dim: Optional[int] = typer.Option(None, "--dim", help="Local dimension; 2 for rme and 3 for ime by default"),
    starts: int = typer.Option(64, "--starts", min=1),
    seed: Optional[int] = typer.Option(None, "--seed"),
    mode: ObservableMode = typer.Option(ObservableMode.SPIN_PLANE, "--mode"),
    state: StateFamily = typer.Option(StateFamily.FREE, "--state"),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the optimal scenario as JSON"),
) -> None:
    """Search states and observables for the most negative witness."""

    seed = settings.resolve_seed(seed)
    with _domain_errors():
        if target is Target.RME:
            result = optimize_rme(dim or 2, starts, seed, mode.value, state.value)
        else:
            if state is not StateFamily.FREE:
                raise MacroentError("The ime target only searches exchange-symmetric states")
            result = optimize_ime(dim or 3, starts, seed, mode.value)
        payload = result.to_dict()
        if out is not None:
            payload["out"] = str(save_scenario(result.scenario, out))
    params = {"target": target, "dim": dim, "starts": starts, "mode": mode, "state": state}
    _emit("optimize", params, payload, seed)


@cli.command("simulate")
def simulate(
    scenario: str = typer.Option("rme", "--scenario"),
    pairs: int = typer.Option(100, "--pairs"),
    shots: int = typer.Option(2000, "--shots"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    loss: float = typer.Option(0.0, "--loss"),
    depolarize: float = typer.Option(0.0, "--depolarize"),
    bipartition: str = typer.Option("split", "--bipartition", help="split, fixed:Q or random"),
    batches: int = typer.Option(16, "--batches"),
) -> None:
    """Estimate the witness from sampled measurement records."""

    seed = settings.resolve_seed(seed)
    with _domain_errors():
        pair = resolve_scenario(scenario)
        config = RunConfig(
            pairs=pairs,
            shots=shots,
            loss_p=loss,
            depolarize_lambda=depolarize,
            bipartition=Bipartition.parse(bipartition),
            seed=seed,
            batches=batches,
        )
        result = estimate(pair, config)
    _emit("simulate", {"scenario": scenario, **config.to_dict()}, result.to_dict(), seed)


@cli.command("validate")
def validate(scenario: str = typer.Option(..., "--scenario", help="Scenario JSON file or registry name")) -> None:
    """Check the invariants of a scenario file."""

    with _domain_errors():
        report = validation_report(resolve_scenario(scenario))
    _emit("validate", {"scenario": scenario}, report)


@cli.command("runs")
def runs(
    command: Optional[str] = typer.Option(None, "--command", help="Only list runs of this subcommand"),
    limit: int = typer.Option(20, "--limit", min=1),
) -> None:
    """Print recent runs from the ledger."""

    typer.echo(_dumps([record.to_dict() for record in list_runs(command, limit)]))


def main() -> None:
    settings.ensure_directories()
    cli()


if __name__ == "__main__":
    main()
