"""
qnmlab CLI — run the named non-malleability experiments and emit verdicts.

Install:
    pip install -e .

Usage:
    qnmlab run <config> [--output PATH] [--parallel N] [-v]
    qnmlab list
    qnmlab describe <experiment>
    qnmlab --help

Exit codes: 0 all checks pass, 1 a check failed, 2 malformed config,
3 unknown experiment, 4 incompatible scheme/attack combination.
"""

import json
import logging
import sys
from collections import defaultdict
from pathlib import Path

import click

from qnm_config import LOG_LEVEL, PARALLEL

log = logging.getLogger("qnmlab.cli")


# ── Helpers ────────────────────────────────────────────────────────────────────

def setup_logging(verbose: int) -> None:
    """-v → INFO, -vv → DEBUG; otherwise QNMLAB_LOG_LEVEL. Always to stderr."""
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = getattr(logging, str(LOG_LEVEL).upper(), logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def fail(err) -> None:
    """Report a qnmlab error on stderr and exit with its code."""
    where = f" [{err.field}]" if getattr(err, "field", "") else ""
    click.echo(f"{err.__class__.__name__}{where}: {err.message}", err=True)
    sys.exit(err.exit_code)


def print_table(rows, keys=None, err=False):
    if not rows:
        click.echo("No results.", err=err)
        return
    keys = keys or list(rows[0].keys())
    widths = {k: max(len(k), max((len(str(r.get(k, ""))) for r in rows), default=0)) for k in keys}
    click.echo("  ".join(k.ljust(widths[k]) for k in keys), err=err)
    click.echo("-" * sum(widths[k] + 2 for k in keys), err=err)
    for row in rows:
        click.echo("  ".join(str(row.get(k, "")).ljust(widths[k]) for k in keys), err=err)


def out(data, as_json=False, keys=None):
    if not data:
        click.echo("No result.")
        return
    if as_json:
        click.echo(json.dumps(data, indent=2, ensure_ascii=False))
        return
    if isinstance(data, list):
        print_table(data, keys)
    else:
        for k, v in data.items():
            if isinstance(v, (dict, list)):
                v = json.dumps(v, ensure_ascii=False)
            click.echo(f"  {k:<22} {v}")


def summary_rows(records):
    rows = []
    for r in records:
        failed = [c["name"] for c in r["checks"] if not c["pass"]]
        rows.append({
            "experiment": r["experiment"],
            "pass":       "yes" if r["pass"] else "NO",
            "checks":     len(r["checks"]),
            "failed":     ", ".join(failed) if failed else "-",
        })
    return rows


# ── Root ───────────────────────────────────────────────────────────────────────

@click.group()
def cli():
    """qnmlab — quantum non-malleability and encryption workbench."""
    pass


# ── Run ────────────────────────────────────────────────────────────────────────

@cli.command("run")
@click.argument("config", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--output", "-o", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="JSON-lines output file (overrides the configs' output).")
@click.option("--parallel", "-p", type=click.IntRange(min=1), default=PARALLEL, show_default=True,
              help="Experiments to run concurrently.")
@click.option("--verbose", "-v", count=True, help="-v for progress, -vv for debug logging.")
def run(config, output, parallel, verbose):
    """Run every experiment in CONFIG and write one verdict per line."""
    from QNMExceptions import QNMError
    from QNMExperiments import load_configs, resolve, run_all, write_verdicts

    setup_logging(verbose)
    groups = defaultdict(list)
    try:
        configs = load_configs(config)
        for cfg in configs:
            resolve(cfg)
            dest = output or (Path(cfg.output) if cfg.output else None)
            groups[str(dest) if dest else "-"].append(cfg)
        results = {dest: run_all(cfgs, parallel=parallel) for dest, cfgs in groups.items()}
    except QNMError as e:
        fail(e)

    records = []
    for dest, recs in results.items():
        if dest == "-":
            write_verdicts(recs, sys.stdout)
        else:
            with open(dest, "w", encoding="utf-8") as fh:
                write_verdicts(recs, fh)
            log.info(f"wrote {len(recs)} verdict(s) to {dest}")
        records += recs

    # the table goes to stderr when verdicts stream on stdout
    print_table(summary_rows(records), err="-" in results)
    sys.exit(0 if all(r["pass"] for r in records) else 1)


# ── Registry ───────────────────────────────────────────────────────────────────

@cli.command("list")
@click.option("--json", "as_json", is_flag=True, help="Output raw JSON.")
def list_experiments(as_json):
    """List the built-in experiments."""
    from QNMExperiments import EXPERIMENTS

    rows = [{"experiment": name, "claim": exp.claim} for name, exp in sorted(EXPERIMENTS.items())]
    if as_json:
        out(rows, as_json=True)
        return
    for row in rows:
        claim = row["claim"]
        click.echo(f"  {row['experiment']:<24} {claim if len(claim) <= 90 else claim[:87] + '...'}")


@cli.command("describe")
@click.argument("experiment")
@click.option("--json", "as_json", is_flag=True, help="Output raw JSON.")
def describe_experiment(experiment, as_json):
    """Show an experiment's claim, default scheme, parameters and tolerances."""
    from QNMExceptions import QNMError
    from QNMExperiments import describe

    try:
        out(describe(experiment), as_json)
    except QNMError as e:
        fail(e)


if __name__ == "__main__":
    cli()
