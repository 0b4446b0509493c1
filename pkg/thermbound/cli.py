"""Thermbound CLI entrypoints."""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

import numpy as np

from .artifacts import ArtifactWriter
from .config_loader import RunConfig, load_run_config
from .dynamics import (
    ENERGY_BASIS_LIMIT,
    clear_energy_basis_cache,
    energy_basis_operator,
    evolve_expectation,
    exact_fluctuation,
    fluctuation_bound,
    time_average,
    time_grid,
    time_variance,
)
from .eigensolve import gap_diagnostics
from .errors import ThermboundError
from .eth import (
    certify_nullity,
    diagonal_window_variance,
    eigenstate_expectations,
    microcanonical_average,
    microcanonical_shell,
    offdiagonal_stats,
)
from .hilbert import HermitianOperator, build_hamiltonian, build_magnetization, build_parity_y
from .logging_utils import LOGGER
from .scaling import (
    angle_grid,
    beta_curve,
    fit_table,
    pick_contrast_states,
    rank_correlation,
    sweep_grid,
    synthetic_deff_table,
)
from .spectrum_cache import load_or_diagonalize
from .states import (
    ProductStateParams,
    diagonal_average,
    eigenstate_vector,
    normalized_energy,
    overlap_profile,
    product_state,
)


def _add_common_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="Path to a JSON run config or an earlier manifest.json")
    parser.add_argument("--out", default=None, help="Output directory (default: thermbound-out)")
    parser.add_argument("--workers", type=int, default=None, help="Worker processes (default: hardware threads)")
    parser.add_argument("--cache", default=None, help="Spectrum cache directory")
    parser.add_argument("--seed", type=int, default=None, help="Seed for sampled gap diagnostics")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermbound")
    sub = parser.add_subparsers(dest="command", required=True)

    p_spectrum = sub.add_parser("spectrum", help="Diagonalize the model and report degeneracies")
    _add_common_args(p_spectrum)

    p_evolve = sub.add_parser("evolve", help="Time trace of the magnetization for one initial state")
    _add_common_args(p_evolve)
    p_evolve.add_argument(
        "--eigenstate-index",
        type=int,
        default=None,
        help="Debug: start from this eigenvector instead of a product state",
    )

    p_sweep = sub.add_parser("sweep", help="NE and log10 d_eff over a theta x phi grid")
    _add_common_args(p_sweep)

    p_scaling = sub.add_parser("scaling", help="d_eff growth with N and beta(phi) fits")
    _add_common_args(p_scaling)
    p_scaling.add_argument(
        "--synthetic-beta",
        type=float,
        default=None,
        help="Debug: fit d_eff = exp(beta * N) instead of running the model",
    )

    p_eth = sub.add_parser("eth", help="Eigenstate expectations and microcanonical averages")
    _add_common_args(p_eth)
    p_eth.add_argument(
        "--observable",
        choices=["magnetization", "identity"],
        default=None,
        help="Observable to diagnose (default from config: magnetization)",
    )
    return parser


def _observable(name: str, n_spins: int) -> HermitianOperator:
    if name == "identity":
        return HermitianOperator.identity(1 << n_spins)
    return build_magnetization(n_spins)


def cmd_spectrum(config: RunConfig) -> int:
    spec = config.model
    spectrum = load_or_diagonalize(spec, config.cache_dir)
    report = gap_diagnostics(
        spectrum,
        config.gaps.tolerance,
        config.gaps.max_dimension,
        samples=config.gaps.samples,
        seed=config.seed,
    )
    with ArtifactWriter(config.output_dir, "spectrum", config.as_dict(), config.workers) as writer:
        writer.write_csv("eigenvalues.csv", ["n", "E"], enumerate(spectrum.eigenvalues))
        writer.write_json(
            "gap_report.json",
            {"model": spec.as_dict(), "residual": spectrum.residual, **report.as_dict()},
        )
    print(f"eigenvalues: {spectrum.dimension}")
    print(f"energy_range: [{spectrum.energy_min!r}, {spectrum.energy_max!r}]")
    print(f"degeneracies: {report.degeneracy_count}")
    print(f"degenerate_gaps: {report.degenerate_gap_count} ({'exhaustive' if report.exhaustive else 'sampled'})")
    print(f"output: {config.output_dir}")
    return 0


def cmd_evolve(config: RunConfig) -> int:
    spec = config.model
    hamiltonian = build_hamiltonian(spec)
    spectrum = load_or_diagonalize(spec, config.cache_dir, hamiltonian=hamiltonian)
    magnetization = build_magnetization(spec.n_spins)

    params = None
    if config.state.eigenstate_index is not None:
        psi = eigenstate_vector(spectrum, config.state.eigenstate_index)
    else:
        params = ProductStateParams(config.state.theta, config.state.phi, spec.n_spins)
        psi = product_state(params)
    profile = overlap_profile(psi, spectrum)

    times = time_grid(config.time_grid.start, config.time_grid.stop, config.time_grid.step)
    trace = evolve_expectation(profile.coefficients, spectrum, magnetization, times)
    diag = eigenstate_expectations(spectrum, magnetization).diag_values
    exact = None
    if spectrum.dimension <= ENERGY_BASIS_LIMIT:
        exact = exact_fluctuation(profile.weights, energy_basis_operator(spectrum, magnetization))
    else:
        LOGGER.warn(f"Skipping exact fluctuation above dimension {ENERGY_BASIS_LIMIT}.")
    report = fluctuation_bound(magnetization, profile.d_eff, exact, spec.n_spins)

    summary = {
        "theta": params.theta if params else None,
        "phi": params.phi if params else None,
        "eigenstate_index": config.state.eigenstate_index,
        "d_eff": profile.d_eff,
        "normalized_energy": normalized_energy(psi, hamiltonian, spectrum),
        "mean_energy": profile.mean_energy,
        "energy_variance": profile.energy_variance,
        "diagonal_average": diagonal_average(profile.weights, diag),
        "time_average": time_average(trace) if len(trace) > 1 else None,
        "time_variance": time_variance(trace) if len(trace) > 1 else None,
        "fluctuation": report.as_dict(),
    }
    with ArtifactWriter(config.output_dir, "evolve", config.as_dict(), config.workers) as writer:
        writer.write_csv("trace.csv", ["t", "value"], trace.rows())
        writer.write_json("summary.json", summary)
    print(f"samples: {len(trace)}")
    print(f"d_eff: {profile.d_eff!r}")
    print(f"diagonal_average: {summary['diagonal_average']!r}")
    if exact is not None:
        print(f"exact_fluctuation: {exact!r} (bound {report.bound!r})")
    print(f"output: {config.output_dir}")
    return 0


def cmd_sweep(config: RunConfig) -> int:
    spec = config.model
    thetas = angle_grid(config.sweep.theta_points, math.pi, endpoint=True)
    phis = angle_grid(config.sweep.phi_points, 2.0 * math.pi, endpoint=False)
    result = sweep_grid(
        spec,
        thetas,
        phis,
        workers=config.workers,
        cache_dir=config.cache_dir,
        with_fluctuation=config.sweep.with_fluctuation,
    )
    header = ["theta", "phi", "NE", "log10_deff"]
    if result.fluctuation_map is not None:
        header.append("exact_fluctuation")
    with ArtifactWriter(config.output_dir, "sweep", config.as_dict(), config.workers) as writer:
        writer.write_csv("sweep.csv", header, result.rows())

    print(f"grid: {thetas.size}x{phis.size} at N={spec.n_spins}")
    print(f"log10_deff_range: [{float(result.log_deff_map.min())!r}, {float(result.log_deff_map.max())!r}]")
    equator = int(np.argmin(np.abs(thetas - math.pi / 2)))
    contrast = pick_contrast_states(phis, result.ne_map[equator])
    print(
        f"contrast_at_theta={float(thetas[equator])!r}: strong phi={contrast.strong_phi!r} "
        f"(NE {contrast.strong_ne:.3f}), weak phi={contrast.weak_phi!r} (NE {contrast.weak_ne:.3f})"
    )
    if result.fluctuation_map is not None and result.fluctuation_map.size > 1:
        rho = rank_correlation(result.log_deff_map, result.fluctuation_map)
        print(f"rank_correlation_log10_deff_vs_fluctuation: {rho!r}")
    print(f"output: {config.output_dir}")
    return 0


def cmd_scaling(config: RunConfig) -> int:
    scaling = config.scaling
    if scaling.phi_values is not None:
        phis = np.asarray(scaling.phi_values, dtype=np.float64)
    else:
        phis = angle_grid(scaling.phi_points, 2.0 * math.pi, endpoint=False)

    if scaling.synthetic_beta is not None:
        LOGGER.warn(f"Synthetic mode: d_eff = exp({scaling.synthetic_beta!r} * N); the model is not run.")
        curve = fit_table(synthetic_deff_table(phis, scaling.n_range, scaling.synthetic_beta))
    else:
        curve = beta_curve(
            config.model,
            scaling.theta,
            phis,
            scaling.n_range,
            workers=config.workers,
            cache_dir=config.cache_dir,
        )
    with ArtifactWriter(config.output_dir, "scaling", config.as_dict(), config.workers) as writer:
        writer.write_csv("deff_table.csv", ["phi", "N", "deff"], curve.table.rows())
        writer.write_csv("beta.csv", ["phi", "beta", "beta_stderr", "r_squared"], curve.rows())

    betas = [fit.beta for fit in curve.fits]
    print(f"fits: {len(curve.fits)} over N={list(curve.table.n_values.tolist())}")
    print(f"beta_range: [{min(betas)!r}, {max(betas)!r}]")
    print(f"output: {config.output_dir}")
    return 0


def cmd_eth(config: RunConfig) -> int:
    spec = config.model
    eth = config.eth
    hamiltonian = build_hamiltonian(spec)
    spectrum = load_or_diagonalize(spec, config.cache_dir, hamiltonian=hamiltonian)
    observable = _observable(eth.observable, spec.n_spins)

    expect = eigenstate_expectations(spectrum, observable)
    shell = microcanonical_shell(expect.energies, eth.shell_center, eth.shell_half_width)
    average = microcanonical_average(expect, shell)
    nullity = None
    if eth.observable == "magnetization":
        nullity = certify_nullity(
            spectrum,
            build_parity_y(spec.n_spins),
            observable,
            eth.null_tolerance,
            hamiltonian=hamiltonian,
            degeneracy_tolerance=config.gaps.tolerance,
        )
    windows = diagonal_window_variance(expect, eth.window_count)
    profile = None
    if eth.offdiag:
        profile = offdiagonal_stats(spectrum, observable, eth.energy_window, eth.bin_width)

    summary = {
        "observable": eth.observable,
        "shell": shell.as_dict(),
        "microcanonical_average": average,
        "max_abs_diagonal": float(np.max(np.abs(expect.diag_values))),
        "nullity": nullity.as_dict() if nullity else None,
        "window_variance": {
            "centers": windows.window_centers,
            "variances": windows.variances,
            "counts": windows.counts,
        },
    }
    with ArtifactWriter(config.output_dir, "eth", config.as_dict(), config.workers) as writer:
        writer.write_csv("eigen_expectations.csv", ["E", "NE", "A_nn"], expect.rows())
        writer.write_json("microcanonical.json", summary)
        if profile is not None:
            writer.write_csv("offdiag.csv", ["omega", "mean_sq", "count"], profile.rows())

    print(f"eigenstates: {spectrum.dimension}")
    print(f"max_abs_diagonal: {summary['max_abs_diagonal']!r}")
    print(f"microcanonical_average: {average!r} ({shell.member_count} states in shell)")
    if nullity is not None:
        print(f"nullity: {'OK' if nullity.certified else 'FAILED'} ({nullity.certified_count} certified)")
        if not nullity.certified:
            LOGGER.warn(f"{len(nullity.failures)} non-degenerate eigenstate(s) exceed the null tolerance.")
    print(f"output: {config.output_dir}")
    return 0


def _load_config(args: argparse.Namespace) -> RunConfig:
    overrides = {"out": args.out, "workers": args.workers, "cache": args.cache, "seed": args.seed}
    config = load_run_config(args.config, overrides)
    if getattr(args, "eigenstate_index", None) is not None:
        config = replace(config, state=replace(config.state, eigenstate_index=args.eigenstate_index))
    if getattr(args, "synthetic_beta", None) is not None:
        config = replace(config, scaling=replace(config.scaling, synthetic_beta=args.synthetic_beta))
    if getattr(args, "observable", None) is not None:
        config = replace(config, eth=replace(config.eth, observable=args.observable))
    return config


COMMANDS = {
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
    "scaling": cmd_scaling,
    "eth": cmd_eth,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
        return COMMANDS[args.command](config)
    except ThermboundError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 1
    finally:
        clear_energy_basis_cache()


if __name__ == "__main__":
    raise SystemExit(main())
