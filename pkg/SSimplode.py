# standard library
import sys
import os
import logging
import argparse
from typing import Dict, List, Optional

# third-party libraries
from mpmath import mp

# local
from lib.archive import RunArchive
from lib.config import RunConfig, build_config, freeze
from lib.env import WrongRuntimeEnvironmentVariable, set_precision
from lib.errors import ConvergenceError, SSimplodeError, VerificationError
from lib.evolution import EvolutionResult, evolve
from lib.file import write_csv, write_json
from lib.mode_solver import (analytic_modes, build_one_mode, build_zero_mode, find_smooth_mode_exponents,
                             mode_residual, normalize_for_evolution)
from lib.profile_solver import ProfileSolution, sample_uniform, solve_profile
from lib.shock_fit import BlowUpReport, fit_all
from lib.smooth_scan import MINUS, PLUS, ScanResult, find_r_n, nu_at, scan_kappa, smoothness_report
from lib.standard_column_order import (DIAGNOSTIC_COLUMNS, MODE_COLUMNS, MODE_SCAN_COLUMNS, PROFILE_COLUMNS,
                                       ROOT_COLUMNS, SCAN_KAPPA_COLUMNS, SCAN_R_COLUMNS, SNAPSHOT_COLUMNS,
                                       SPECTRUM_COLUMNS)
from lib.utils import EXIT_MISSING_COMMAND, Steps, exit_code_for
from lib.validate_utils import failed_checks, read_report_from_dir, write_report_to_dir
from lib.verify import verify




# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                    FUNCTIONS                    #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def prepare_run(config: RunConfig):
    """Precision, run directory, frozen config and the archive of a command"""
    dps = set_precision(config.solver.dps)
    config.solver.dps = dps
    run_dir = os.path.join(config.out, config.command)
    freeze(config, run_dir)
    print(f'working precision: {dps} digits, run directory: {run_dir}')
    return run_dir, RunArchive(os.path.join(config.out, 'archive'))


def smooth_profile_report(sol: ProfileSolution) -> Dict:
    report = {}
    for side in (PLUS, MINUS) if sol.has_exterior else (PLUS,):
        try:
            report[side] = smoothness_report(sol, side)
        except ConvergenceError as e:
            logging.getLogger(__name__).warning(f'c_{side}: {e}')
    return report


def roots_rows(scan: ScanResult) -> List[List]:
    return [[root.n, root.r, root.nu, root.kappa_star, root.kappa_zero_found, root.parity_expected]
            for root in scan.roots]


def mode_rows(mode, n: int = 400) -> List[List]:
    sol = mode.base
    Zmax = 2*sol.Zp2 if mode.alpha2 is not None else sol.Z2
    rows = []
    for i in range(n + 1):
        Z = Zmax*i/n
        rows.append([Z, *mode.evaluate(Z)])
    return rows



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                    COMMANDS                     #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def cmd_profile(config: RunConfig):
    run_dir, archive = prepare_run(config)
    steps = Steps()

    with steps.run('Solve the profile'):
        sol = solve_profile(config.euler_params(), None, config.solver_options())
        print(f'  Z2 = {mp.nstr(sol.Z2, 12)}, eta = {mp.nstr(sol.params.eta, 12)}')

    with steps.run('Smoothness at the sonic point'):
        sol.smoothness = smooth_profile_report(sol)

    with steps.run('Store the profile and write plot data'):
        digest = archive.store('profile', sol.to_dict())
        write_csv(os.path.join(run_dir, 'profile.csv'), PROFILE_COLUMNS, sample_uniform(sol))
        print(f'  profile {digest}')
    return sol


def cmd_scan_r(config: RunConfig):
    run_dir, archive = prepare_run(config)
    steps = Steps()
    p = config.params

    with steps.run('Scan c+ over r'):
        scan = find_r_n(p.d, p.ell, tuple(config.scan.nu_int_window), config.scan.r_samples,
                        config.solver_options(), config.scan.xtol, config.workers, config.seed)
        print(f'  roots: {[mp.nstr(r, 10) for r in scan.r_n_list]}')

    with steps.run('Store the scan and write plot data'):
        digest = archive.store('scan', scan.to_dict())
        write_csv(os.path.join(run_dir, 'scan_r.csv'), SCAN_R_COLUMNS,
                  [[r, c, nu_at(p.d, p.ell, r)] for r, c in scan.sign_samples])
        write_csv(os.path.join(run_dir, 'roots.csv'), ROOT_COLUMNS, roots_rows(scan))
        print(f'  scan {digest}')
    return scan


def cmd_scan_kappa(config: RunConfig):
    scan = cmd_scan_r(config)
    run_dir = os.path.join(config.out, config.command)
    archive = RunArchive(os.path.join(config.out, 'archive'))
    steps = Steps()

    with steps.run('Scan c- over kappa at every root'):
        scan = scan_kappa(scan, config.scan.kappa_samples, config.solver_options(), config.workers, config.seed)
        for root in scan.roots:
            found = 'none' if root.kappa_star is None else mp.nstr(root.kappa_star, 10)
            print(f'  r_{root.n} = {mp.nstr(root.r, 10)}: kappa* = {found} (zero expected: {root.parity_expected})')

    with steps.run('Store the scan and write plot data'):
        digest = archive.store('scan', scan.to_dict())
        write_csv(os.path.join(run_dir, 'scan_kappa.csv'), SCAN_KAPPA_COLUMNS, scan.kappa_samples)
        write_csv(os.path.join(run_dir, 'roots.csv'), ROOT_COLUMNS, roots_rows(scan))
        print(f'  scan {digest}')
    return scan


def cmd_modes(config: RunConfig):
    run_dir, archive = prepare_run(config)
    steps = Steps()

    with steps.run('Solve the profile'):
        sol = solve_profile(config.euler_params(), None, config.solver_options())

    with steps.run('Analytic modes'):
        for mode in analytic_modes(sol):
            print(f'  {mode.params.classification.value}: residual {mp.nstr(mode_residual(mode), 5)}')

    with steps.run('Smooth modes'):
        spectrum = find_smooth_mode_exponents(sol, config.modes.Omega_samples, config.modes.theta_samples,
                                              config.modes.margin)
        for m in spectrum.modes:
            theta = 'none' if m.theta is None else mp.nstr(m.theta, 8)
            print(f'  Omega = {mp.nstr(m.Omega, 10)}, theta = {theta}')

    with steps.run('Store the spectrum and write plot data'):
        profile_digest = archive.store('profile', sol.to_dict())
        payload = {'profile': profile_digest, **spectrum.to_dict()}
        if config.modes.zero_mode_Omega is not None:
            zero = build_zero_mode(sol, config.modes.zero_mode_Omega)
            payload['zero_mode'] = archive.store('mode', zero.to_dict(profile_digest))
            write_csv(os.path.join(run_dir, 'zero_mode.csv'), MODE_COLUMNS, mode_rows(zero))
        digest = archive.store('spectrum', payload)
        write_csv(os.path.join(run_dir, 'mode_scan.csv'), MODE_SCAN_COLUMNS, spectrum.samples)
        write_csv(os.path.join(run_dir, 'spectrum.csv'), SPECTRUM_COLUMNS,
                  [[m.Omega, m.theta, m.N_regularity] for m in spectrum.modes])
        print(f'  spectrum {digest}')
    return spectrum


def cmd_evolve(config: RunConfig) -> EvolutionResult:
    run_dir, archive = prepare_run(config)
    steps = Steps()
    e = config.evolution

    with steps.run('Solve the profile'):
        sol = solve_profile(config.euler_params(), None, config.solver_options())

    with steps.run(f'Prepare the perturbation ({e.mode})'):
        mode = None
        if e.mode == 'zero':
            mode = normalize_for_evolution(build_zero_mode(sol, e.Omega))
        elif e.mode == 'smooth':
            spectrum = find_smooth_mode_exponents(sol, config.modes.Omega_samples, config.modes.theta_samples,
                                                  config.modes.margin)
            unstable = [m for m in spectrum.modes if m.theta is not None and m.Omega < sol.params.r - 1e-2]
            if not unstable:
                raise ConvergenceError('no smooth mode below the gauge mode was found')
            mode = normalize_for_evolution(build_one_mode(sol, unstable[0].Omega, unstable[0].theta))
        if mode is not None:
            print(f'  Omega = {mp.nstr(mode.params.Omega, 10)}')

    with steps.run('Evolve'):
        run = evolve(sol, mode, e.epsilon, config.evolution_controls())
        print(f'  stopped ({run.diagnostics.stop_reason}) at tau = {run.state.tau:.6g} after {run.steps} steps')

    with steps.run('Fit the blow-up'):
        fits = fit_all(run.diagnostics)
        for name, fit in fits.items():
            print(f'  {name}: tau* = {fit.tau_star:.5g} {fit.tau_star_ci}, s = {fit.s:.4g} {fit.s_ci}')

    with steps.run('Store the report and write plot data'):
        profile_digest = archive.store('profile', sol.to_dict())
        report = BlowUpReport(
            profile=profile_digest,
            mode=None if mode is None else archive.store('mode', mode.to_dict(profile_digest)),
            epsilon=float(e.epsilon),
            stop_reason=run.diagnostics.stop_reason,
            stop_tau=run.diagnostics.stop_tau,
            steps=run.steps,
            eps_noise=run.diagnostics.eps_noise,
            fits=fits,
        ).to_dict()
        digest = archive.store('report', report)
        write_json(os.path.join(run_dir, 'report.json'), report)
        write_csv(os.path.join(run_dir, 'diagnostics.csv'), DIAGNOSTIC_COLUMNS, run.diagnostics.rows())
        if run.snapshots:
            rows = [[tau, z, rho, u] for tau, rho_s, u_s in run.snapshots
                    for z, rho, u in zip(run.grid.Z, rho_s, u_s)]
            write_csv(os.path.join(run_dir, 'snapshots.csv.gz'), SNAPSHOT_COLUMNS, rows)
        print(f'  report {digest}')
    return run


def cmd_verify(config: RunConfig):
    run_dir, _ = prepare_run(config)
    steps = Steps()

    with steps.run(f'Run verification tiers 0..{config.verify_level}'):
        rows = verify(config.verify_level, config.solver_options(), config.workers, config.seed)
        write_report_to_dir(rows, run_dir)

    with steps.run('Analyze the report'):
        checks, total_checks = read_report_from_dir(run_dir)
        failed = failed_checks(checks)
        print(f'  {total_checks - len(failed)} of {total_checks} checks passed')
        for name in failed:
            print(f'  FAILED: {name}')

    if failed:
        raise VerificationError(f'{len(failed)} of {total_checks} checks failed: {", ".join(failed)}')
    return rows





# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                      MAIN                       #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

##### Custom arguments types #####

def file_path_type(string: str):
    if not os.path.isfile(string):
        raise FileNotFoundError(string)
    return string

def maybe_dir_type(string: str):
    if not os.path.isdir(string) and os.path.exists(string):
        raise NotADirectoryError(string)
    return string



COMMANDS = {
    'profile': cmd_profile,
    'scan-r': cmd_scan_r,
    'scan-kappa': cmd_scan_kappa,
    'modes': cmd_modes,
    'evolve': cmd_evolve,
    'verify': cmd_verify,
}


def add_common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument('--config', dest='CONFIG', type=file_path_type, required=False, default=None,
        help='Path to a JSON run config (see sample/config.example.json)')
    parser.add_argument('--out', dest='OUT', type=maybe_dir_type, required=False, default=None,
        help='Output directory; the run goes to <out>/<command>, artifacts to <out>/archive. Default: runs')
    parser.add_argument('--dps', dest='DPS', type=int, required=False, default=None,
        help='Working precision in decimal digits. Default: $SSIMPLODE_DPS or 50')
    parser.add_argument('--workers', dest='WORKERS', type=int, required=False, default=None,
        help='Worker processes for sweeps. Default: 1')
    parser.add_argument('--set', dest='OVERRIDES', action='append', default=[], metavar='SECTION.KEY=VALUE',
        help='Override a config entry, e.g. --set evolution.epsilon=-1e-2. Repeatable')
    parser.add_argument('--verbose', dest='VERBOSE', action='store_true',
        help='Debug logging')
    parser.add_argument('--d', dest='D', type=int, required=False, default=None, help='Space dimension')
    parser.add_argument('--ell', dest='ELL', type=str, required=False, default=None, help='ell = 2/(gamma-1)')
    parser.add_argument('--r', dest='R', type=str, required=False, default=None, help='Blow-up speed r')
    parser.add_argument('--kappa', dest='KAPPA', type=str, required=False, default=None,
        help='Exterior trajectory label kappa')


def flags_from_args(args) -> Dict:
    flags = {
        'out': None if args.OUT is None else str(args.OUT),
        'workers': args.WORKERS,
        'params': {'d': args.D, 'ell': args.ELL, 'r': args.R, 'kappa': args.KAPPA},
        'solver': {'dps': args.DPS},
    }
    if getattr(args, 'LEVEL', None) is not None:
        flags['verify_level'] = args.LEVEL
    return flags


def main(argv: Optional[List[str]] = None):
    p = argparse.ArgumentParser(description='Self-similar implosion profiles, their radial perturbations and evolution')
    subparser = p.add_subparsers(dest='command')
    PROFILE_PARSER = subparser.add_parser('profile', help="solves one profile (d, ell, r, kappa) and writes it with plot data")
    SCAN_R_PARSER = subparser.add_parser('scan-r', help="finds the blow-up speeds r_n of smooth interiors")
    SCAN_KAPPA_PARSER = subparser.add_parser('scan-kappa', help="finds r_n and the kappa that makes the exterior smooth")
    MODES_PARSER = subparser.add_parser('modes', help="analytic and smooth radial modes of a profile")
    EVOLVE_PARSER = subparser.add_parser('evolve', help="evolves a perturbed profile towards shock formation")
    VERIFY_PARSER = subparser.add_parser('verify', help="runs the tiered self-checks")

    for parser in (PROFILE_PARSER, SCAN_R_PARSER, SCAN_KAPPA_PARSER, MODES_PARSER, EVOLVE_PARSER, VERIFY_PARSER):
        add_common_arguments(parser)
    VERIFY_PARSER.add_argument('--level', dest='LEVEL', type=int, choices=[0, 1, 2, 3], required=False, default=None,
        help='Highest tier to run. Default: 0')

    args = p.parse_args(argv)

    if args.command not in COMMANDS:
        p.print_help(sys.stderr)
        exit(EXIT_MISSING_COMMAND)

    logging.basicConfig(level=logging.DEBUG if args.VERBOSE else logging.INFO,
                        format='%(asctime)s %(name)s %(levelname)s: %(message)s')
    try:
        config = build_config(args.command, args.CONFIG, args.OVERRIDES, flags_from_args(args))
        return COMMANDS[args.command](config)
    except (SSimplodeError, WrongRuntimeEnvironmentVariable) as e:
        print(f'ERROR: {type(e).__name__}: {e}', file=sys.stderr)
        exit(exit_code_for(e))




if __name__ == "__main__":
    main()
