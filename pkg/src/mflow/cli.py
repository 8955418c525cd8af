"""Command-line entry points: scheme verification, stability certification,
single runs, convergence tables and energy traces.

Every command exits 0 on success.  Failures print one machine-readable line
``MFLOW_ERROR {...}`` to stderr and exit 2 for usage/config problems or 1
for computation failures.
"""
import json
import os
import sys

import click
import numpy as np

from .certificates import (builtin_decomposition, certificate_report,
                           certify_bounded, certify_dissipative,
                           project_onto_partition)
from .experiments import (RunConfig, convergence_table, energy_trace,
                          error_grid, load_config, resolve_scheme,
                          write_table_csv, write_trace_csv,
                          write_trajectory_csv)
from .flow import run as run_flow
from .schemes import consistency_vars, format_rational, shifted_weights, weights
from .wasserstein import initial_quantile, quantile_to_density, write_density_csv
from . import experiments


def _fail(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print("MFLOW_ERROR " + json.dumps(payload, sort_keys=True), file=sys.stderr)
    sys.exit(code)


def _usage_guard(fn, *args, **kwargs):
    """Run config/argument resolution; problems there are usage errors."""
    try:
        return fn(*args, **kwargs)
    except (ValueError, TypeError, KeyError, OSError,
            json.JSONDecodeError) as exc:
        _fail(exc, 2)


def _compute_guard(fn, *args, **kwargs):
    """Run the actual computation; any failure is a runtime error."""
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        _fail(exc, 1)


def _outdir(out):
    if out and not os.path.isdir(out):
        os.makedirs(out, exist_ok=True)
    return out or "."


@click.group()
def main():
    """Energy-stable multi-step/multi-stage minimizing-movement schemes."""


@main.command("verify-scheme")
@click.argument("scheme", required=False)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Read the scheme name from a config file instead.")
def verify_scheme(scheme, config_path):
    """Print the consistency variables and classified order of SCHEME."""
    if scheme is None:
        if config_path is None:
            _fail(ValueError("give a scheme name or --config"), 2)
        scheme = _usage_guard(load_config, config_path).scheme
    coeffs = _usage_guard(resolve_scheme, scheme)
    report = _compute_guard(consistency_vars, coeffs)
    click.echo("scheme: %s" % scheme)
    click.echo("steps (M): %d   stages (N): %d" % (report.M, report.N))
    for label, seq in (("a", report.a), ("b", report.b),
                       ("c", report.c), ("d", report.d)):
        click.echo("%s_N = %s" % (label, format_rational(seq[report.N])))
    click.echo("order: %d" % report.order)


@main.command("certify")
@click.argument("scheme", required=False)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Read the scheme name from a config file instead.")
@click.option("--l1", type=float, default=None,
              help="Lower shift; with --l2 checks the uniform-bound form.")
@click.option("--l2", type=float, default=None,
              help="Upper shift; with --l1 checks the uniform-bound form.")
@click.option("--project/--no-project", default=True,
              help="Repair per-edge theta sums before checking (default on).")
def certify(scheme, config_path, l1, l2, project):
    """Check the stability certificate of SCHEME and print the report."""
    if scheme is None:
        if config_path is None:
            _fail(ValueError("give a scheme name or --config"), 2)
        scheme = _usage_guard(load_config, config_path).scheme
    if (l1 is None) != (l2 is None):
        _fail(ValueError("--l1 and --l2 must be given together"), 2)
    coeffs = _usage_guard(resolve_scheme, scheme)
    dec = _usage_guard(builtin_decomposition, scheme)

    def job():
        if l1 is not None:
            w = shifted_weights(coeffs, l1, l2)
            d = project_onto_partition(dec, w) if project else dec
            return certify_bounded(coeffs, l1, l2, d)
        w = weights(coeffs)
        d = project_onto_partition(dec, w) if project else dec
        return certify_dissipative(coeffs, d)

    cert = _compute_guard(job)
    click.echo(certificate_report(cert, title=scheme))


@main.command("run")
@click.option("--config", "config_path", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), default=None,
              help="Output directory (default: current directory).")
def run_cmd(config_path, out):
    """Run one trajectory and write trajectory + final-state CSV files."""
    config = _usage_guard(load_config, config_path)
    outdir = _outdir(out)

    def job():
        scheme = config.scheme_coefficients()
        k = float(config.final_time) / config.n_steps
        if config.problem == "euclidean_quadratic":
            space, u0 = experiments._euclidean_setup(config)
        else:
            space = experiments._pde_space(config.problem)
            u0 = initial_quantile(config.mq_base)
        traj = run_flow(scheme, space, u0, k, config.n_steps,
                        bootstrap=config.bootstrap, substeps=config.substeps)
        tpath = os.path.join(outdir, "trajectory.csv")
        write_trajectory_csv(tpath, space, traj, config.problem, config.scheme)
        if config.problem == "euclidean_quadratic":
            fpath = os.path.join(outdir, "final_point.csv")
            with open(fpath, "w") as fh:
                fh.write("i,x\n")
                for i, x in enumerate(traj.points[-1]):
                    fh.write("%d,%.17g\n" % (i, x))
        else:
            grid = error_grid()
            u = quantile_to_density(traj.points[-1], grid)
            fpath = os.path.join(outdir, "final_density.csv")
            write_density_csv(fpath, grid, u)
        return tpath, fpath

    tpath, fpath = _compute_guard(job)
    click.echo("wrote %s" % tpath)
    click.echo("wrote %s" % fpath)


@main.command("convergence")
@click.option("--config", "config_path", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), default=None,
              help="Output directory (default: current directory).")
def convergence(config_path, out):
    """Run the convergence study and write the table CSV."""
    config = _usage_guard(load_config, config_path)
    outdir = _outdir(out)
    table = _compute_guard(convergence_table, config)
    path = os.path.join(outdir, "table.csv")
    write_table_csv(path, table)
    click.echo("problem: %s   scheme: %s   T = %s"
               % (table.problem, table.scheme, table.final_time))
    for r in table.rows:
        order = "      " if np.isnan(r.order) else "%6.3f" % r.order
        click.echo("n=%4d  mq=%4d  error=%.6e  order=%s"
                   % (r.n, r.mq, r.error, order))
    click.echo("fitted slope: %.4f" % table.slope)
    click.echo("wrote %s" % path)


@main.command("energy-trace")
@click.option("--config", "config_path", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), default=None,
              help="Output directory (default: current directory).")
def energy_trace_cmd(config_path, out):
    """Trace energy and step displacement along one run; write the CSV."""
    config = _usage_guard(load_config, config_path)
    outdir = _outdir(out)
    trace = _compute_guard(energy_trace, config)
    path = os.path.join(outdir, "trace.csv")
    write_trace_csv(path, trace)
    click.echo("problem: %s   scheme: %s   k = %.6g"
               % (trace.problem, trace.scheme, trace.k))
    click.echo("max single-step energy rise: %.6e" % trace.max_rise())
    click.echo("max energy excess over first step: %.6e"
               % trace.max_excess_over_first_step())
    click.echo("wrote %s" % path)


if __name__ == "__main__":
    main()
