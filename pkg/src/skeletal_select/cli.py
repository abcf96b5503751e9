"""Command line: ``skeletal-select run`` and ``skeletal-select verify``.

Exit codes: 0 all checks pass, 1 a check or the pipeline failed, 2 bad input.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from .instance import Instance, InstanceError
from .tasks import PipelineFailure, VerifyInputError, execute, verify

OUT_ENV = "SKELETAL_SELECT_OUT"
DEFAULT_OUT = "skeletal-out"


def _load(path: str, tol, depth, seed) -> Instance:
    try:
        raw = Instance.load(path).raw
    except InstanceError as e:
        click.echo(f"schema error at {e.pointer}: {e.message}", err=True)
        sys.exit(2)
    except OSError as e:
        click.echo(f"cannot read {path}: {e}", err=True)
        sys.exit(2)
    if tol is not None or depth is not None or seed is not None:
        raw = dict(raw)
        params = dict(raw.get("params", {}))
        for key, val in (("tol", tol), ("depth", depth), ("seed", seed)):
            if val is not None:
                params[key] = val
        raw["params"] = params
    try:
        return Instance.from_dict(raw)
    except InstanceError as e:
        click.echo(f"schema error at {e.pointer}: {e.message}", err=True)
        sys.exit(2)


def _summary(report) -> None:
    for r in report.records:
        if not r["pass"]:
            click.echo(f"FAIL {r['name']}: measured={r['measured']} bound={r['bound']} witness={r['witness']}",
                       err=True)
    n_bad = len(report.failures())
    click.echo(f"{report.task}: {len(report.records) - n_bad}/{len(report.records)} checks pass")


@click.group()
def main():
    """Continuous selections of set-valued maps on gridded domains."""


@main.command()
@click.argument("instance", type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help=f"Output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT}).")
@click.option("--tol", type=float, default=None, help="Override params.tol.")
@click.option("--depth", type=int, default=None, help="Override params.depth.")
@click.option("--seed", type=int, default=None, help="Override params.seed.")
def run(instance, out_dir, tol, depth, seed):
    """Run the task named in INSTANCE and write its artifacts."""
    inst = _load(instance, tol, depth, seed)
    out = Path(out_dir or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    try:
        res = execute(inst)
    except PipelineFailure as e:
        click.echo(f"pipeline failure {e}", err=True)
        sys.exit(1)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(res.files.items()):
        (out / name).write_text(text)
    _summary(res.report)
    click.echo(f"artifacts in {out}")
    sys.exit(0 if res.report.ok else 1)


@main.command(name="verify")
@click.argument("selection", type=click.Path(dir_okay=False))
@click.argument("instance", type=click.Path(dir_okay=False))
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None,
              help="Also write the verification report JSON here.")
def verify_cmd(selection, instance, report_path):
    """Check a selection CSV against INSTANCE (no construction is run)."""
    inst = _load(instance, None, None, None)
    try:
        text = Path(selection).read_text()
    except OSError as e:
        click.echo(f"cannot read {selection}: {e}", err=True)
        sys.exit(2)
    try:
        rep = verify(text, inst)
    except VerifyInputError as e:
        click.echo(f"domain mismatch: {e}", err=True)
        sys.exit(2)
    if report_path:
        Path(report_path).write_text(rep.to_json())
    pts = next(r for r in rep.records if r["name"] == "verify/points")
    if not pts["pass"]:
        click.echo(f"missing points: {pts['witness']} ({pts['measured']} total)", err=True)
    _summary(rep)
    sys.exit(0 if rep.ok else 1)


if __name__ == "__main__":
    main()
