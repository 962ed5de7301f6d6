import argparse
import json
import logging
import os
import sys

import numpy as np
import pandas as pd

from thr_design import __version__
from thr_design.acoustics import (
    DEFAULT_BAND,
    FrequencyGrid,
    ParamRanges,
    PhysicalConstants,
    eq4_residual,
    load_constants,
    resonant_frequencies,
    spectrum_peaks,
    stl_spectrum,
)
from thr_design.checkpoint import load_model, save_model
from thr_design.checks import SUITES, run_checks
from thr_design.config import DEFAULTS, PRESETS, load_config, resolve
from thr_design.data import (
    BinSpec,
    DatasetSplit,
    compute_normalization,
    generate_dataset,
    read_datasets,
    split_dataset,
    write_dataset,
)
from thr_design.design import (
    DesignTarget,
    design,
    design_filter,
    design_report,
    sensitivity_map,
    sensitivity_profile,
    write_sensitivity,
)
from thr_design.errors import (
    CheckFailedError,
    DomainError,
    InputFileError,
    ResonanceOutOfBandError,
    ThrDesignError,
    ValidationError,
)
from thr_design.ga import GAConfig, ObjectiveSpec, ga_report, optimize, paired_runs
from thr_design.learning_curve import LearningCurve, curve_summary
from thr_design.nn import TrainConfig, build_model, evaluate, fit, prepare_arrays
from thr_design.param_keys import GP_ORDER, to_cli
from thr_design.tmm import network_spectrum, read_network, side_branch_from_values, write_network
from thr_design.utils import jsonable, read_keyvalue, write_json, write_table
from thr_design.verif import verify_model, write_verification

logger = logging.getLogger('thr_design')


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the validation exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common_parser():
    parser = ArgumentParser(add_help=False)
    parser.add_argument('--seed', type=int, default=None, help='Random seed (default 0)')
    parser.add_argument('--constants-file', type=str, default=None, help='JSON file with air properties')
    parser.add_argument('--output-dir', type=str, default=None, help='Directory of output files (default .)')
    parser.add_argument('--format', type=str, default=None, choices=['csv', 'json'], help='Table format (default csv)')
    parser.add_argument('--config', type=str, default=None, help='JSON config file, keys mirror the long flags')
    parser.add_argument('--threads', type=int, default=None, help='Worker threads (default 1)')
    parser.add_argument('--cross-section', type=float, default=None, help='Duct cross-section in m^2 (default 0.01)')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', default=False, help='Debug logging')
    verbosity.add_argument('-q', '--quiet', action='store_true', default=False, help='Warnings and errors only')
    return parser


def _grid_parser():
    parser = ArgumentParser(add_help=False)
    parser.add_argument('--grid-start', type=float, default=None, help='First frequency in Hz (default 101)')
    parser.add_argument('--grid-step', type=float, default=None, help='Frequency step in Hz (default 1)')
    parser.add_argument('--grid-count', type=int, default=None, help='Number of frequencies (default 500)')
    return parser


def get_parser():
    parser = ArgumentParser(prog='thr-design', description='Design of two-order Helmholtz resonators')
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest='command', required=True)
    common, grid = _common_parser(), _grid_parser()

    p = sub.add_parser('stl', parents=[common, grid], help='STL spectrum and resonances of one resonator')
    p.add_argument('input', type=str, help='Key/value file with a1..h2 (cm) or R1..C2 (SI)')
    p.set_defaults(func=cmd_stl)

    p = sub.add_parser('gen-data', parents=[common, grid], help='Generate a training dataset')
    p.add_argument('--preset', type=str, default=None, choices=sorted(PRESETS), help='Size preset')
    p.add_argument('--band-width', type=float, default=None, help='Group band width in Hz (default 50)')
    p.add_argument('--band-min', type=float, default=None, help='Lower edge of the banded range in Hz')
    p.add_argument('--band-max', type=float, default=None, help='Upper edge of the banded range in Hz')
    p.add_argument('--samples-per-group', type=int, default=None, help='Samples per group')
    p.add_argument('--max-attempts-per-group', type=int, default=None, help='Draw budget per group')
    p.add_argument('--threshold', type=float, default=None, help='Minimum STL at the resonances in dB')
    p.add_argument('--chunk-size', type=int, default=None, help='Draws evaluated per batch')
    p.add_argument('-o', '--out', type=str, default=None, help='Dataset file (default OUTPUT_DIR/dataset.csv)')
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser('train', parents=[common], help='Train the surrogate network')
    p.add_argument('datasets', type=str, nargs='+', help='Dataset files')
    p.add_argument('--preset', type=str, default=None, choices=sorted(PRESETS), help='Size preset')
    p.add_argument('--batch-size', type=int, default=None)
    p.add_argument('--max-epochs', type=int, default=None)
    p.add_argument('--patience', type=int, default=None, help='Epochs without improvement before stopping')
    p.add_argument('--dropout', type=float, default=None)
    p.add_argument('--learning-rate', type=float, default=None)
    p.add_argument('--hidden', type=int, nargs='+', default=None, help='Hidden layer widths')
    p.add_argument('--val-fraction', type=float, default=None)
    p.add_argument('--test-fraction', type=float, default=None)
    p.add_argument('-o', '--out', type=str, default=None, help='Model file (default OUTPUT_DIR/model.json)')
    p.add_argument('--resume', type=str, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('design', parents=[common], help='Inverse design for target resonant frequencies')
    p.add_argument('--model', type=str, required=True, help='Model file')
    p.add_argument('--targets', type=float, nargs=2, action='append', required=True, metavar=('F1', 'F2'),
                   help='Target resonant frequencies in Hz; repeat to design an acoustic filter')
    p.add_argument('--candidates', type=int, default=None, help='Number of candidate spectra (default 100)')
    p.add_argument('--threshold', type=float, default=None, help='Minimum STL at the targets in dB')
    p.add_argument('--spacing', type=float, default=None, help='Resonator spacing of the filter in m')
    p.add_argument('--top', type=int, default=None, help='Ranked results kept in the report')
    p.add_argument('--tmm', action='store_true', default=False, help='Also evaluate designs with transfer matrices')
    p.add_argument('--sensitivity', action='store_true', default=False, help='Write the neck-radius sensitivity map')
    p.add_argument('--span', type=float, default=None, help='Relative half-width of the sensitivity grid')
    p.add_argument('--map-size', type=int, default=None, help='Odd number of points per sensitivity axis')
    p.set_defaults(func=cmd_design)

    p = sub.add_parser('optimize', parents=[common], help='Genetic algorithm, optionally seeded by the surrogate')
    p.add_argument('--targets', type=float, nargs=2, required=True, metavar=('F1', 'F2'))
    p.add_argument('--model', type=str, default=None, help='Model file for elite seeding')
    p.add_argument('--seed-elites', type=int, nargs='?', const=5, default=None,
                   help='Number of surrogate-designed initial individuals (default 5)')
    p.add_argument('--paired', type=int, default=None, help='Run N seeded/unseeded pairs')
    p.add_argument('--threshold', type=float, default=None)
    p.add_argument('--population', type=int, default=None)
    p.add_argument('--generations', type=int, default=None)
    p.add_argument('--elite-candidates', type=int, default=None)
    p.add_argument('--tournament-size', type=int, default=None)
    p.add_argument('--crossover-prob', type=float, default=None)
    p.add_argument('--mutation-prob', type=float, default=None)
    p.add_argument('--mutation-scale', type=float, default=None)
    p.add_argument('--elitism', type=int, default=None)
    p.add_argument('--penalty', type=float, default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser('tmm', parents=[common, grid], help='Transmission loss of a duct network')
    p.add_argument('network', type=str, help='Network file')
    p.set_defaults(func=cmd_tmm)

    p = sub.add_parser('check', parents=[common], help='Run invariant suites')
    p.add_argument('suite', type=str, nargs='?', default='all', choices=[*SUITES, 'all'])
    p.add_argument('--samples', type=int, default=None, help='Cases per suite')
    p.add_argument('--expect-fail', action='store_true', default=False, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser('verify', parents=[common], help='Evaluate a model on held-out samples')
    p.add_argument('datasets', type=str, nargs='+', help='Dataset files')
    p.add_argument('--model', type=str, required=True, help='Model file')
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser('curve', parents=[common], help='Summarize a learning curve')
    p.add_argument('curve', type=str, help='Learning-curve CSV')
    p.add_argument('-a', '--average', type=int, default=None,
                   help='Running average using second order Savitzky-Golay filter')
    p.set_defaults(func=cmd_curve)
    return parser


def _options(args) -> dict:
    flags = vars(args)
    keys = [k for k in DEFAULTS if k in flags]
    return resolve(flags, keys, load_config(args.config), getattr(args, 'preset', None))


def _constants(opts) -> PhysicalConstants:
    if opts['constants_file']:
        return load_constants(opts['constants_file'])
    return PhysicalConstants()


def _grid(opts) -> FrequencyGrid:
    return FrequencyGrid(opts['grid_start'], opts['grid_step'], opts['grid_count'])


def _out(opts, name) -> str:
    os.makedirs(opts['output_dir'], exist_ok=True)
    return os.path.join(opts['output_dir'], name)


def _report(args, opts, pc, **content) -> dict:
    return dict(content, command=args.command, version=__version__, config=opts, constants=pc.to_dict())


def cmd_stl(args):
    opts = _options(args)
    pc, grid = _constants(opts), _grid(opts)
    values, sections = read_keyvalue(args.input)
    if sections:
        raise InputFileError(args.input, sections[0][2], "stl input takes no sections")
    try:
        branch = side_branch_from_values(values, args.input, None, pc)
    except DomainError as e:
        raise InputFileError(args.input, None, str(e))
    band = (max(grid.start, DEFAULT_BAND[0]), min(grid.stop, DEFAULT_BAND[1]))
    if not band[0] < band[1]:
        raise ValidationError(f"frequency grid {grid.start:g}-{grid.stop:g} Hz does not overlap the resonance "
                              f"band {DEFAULT_BAND[0]:g}-{DEFAULT_BAND[1]:g} Hz")
    spectrum = stl_spectrum(branch.eep, opts['cross_section'], pc, grid)
    write_table(pd.DataFrame({'frequency': spectrum.frequencies, 'stl': spectrum.values}),
                _out(opts, f"stl.{opts['format']}"), opts['format'])

    try:
        resonances = resonant_frequencies(branch.eep, opts['cross_section'], pc, band)
        resonance_info = dict(resonances.to_dict(),
                              relative_residual=[eq4_residual(branch.eep, w, relative=True)
                                                 for w in resonances.angular])
    except ResonanceOutOfBandError as e:
        logger.warning(str(e))
        resonance_info = None
    report = _report(args, opts, pc, eep=branch.eep.to_dict(), resonances=resonance_info,
                     peaks=spectrum_peaks(spectrum).tolist())
    if branch.gp is not None:
        report['gp_cm'] = {k: to_cli(k, v) for k, v in zip(GP_ORDER, branch.gp.genome())}
    write_json(report, _out(opts, 'stl_report.json'))


def cmd_gen_data(args):
    opts = _options(args)
    pc = _constants(opts)
    bins = BinSpec(opts['band_width'], (opts['band_min'], opts['band_max']),
                   opts['samples_per_group'], opts['max_attempts_per_group'])
    df, report = generate_dataset(bins, opts['seed'], ParamRanges(), opts['threshold'], opts['cross_section'],
                                  pc, _grid(opts), DEFAULT_BAND, opts['threads'], opts['chunk_size'])
    path = args.out or _out(opts, 'dataset.csv')
    write_dataset(df, path)
    write_json(_report(args, opts, pc, dataset=path, generation=report), _out(opts, 'gen_report.json'))


def cmd_train(args):
    if args.resume is not None:
        raise ValidationError("resuming training is not supported, start a new run")
    opts = _options(args)
    pc = _constants(opts)
    df = read_datasets(args.datasets)
    val, test = opts['val_fraction'], opts['test_fraction']
    train_df, val_df, test_df = split_dataset(df, DatasetSplit(1. - val - test, val, test, opts['seed']))
    stats = compute_normalization(train_df)
    config = TrainConfig(batch_size=opts['batch_size'], max_epochs=opts['max_epochs'], patience=opts['patience'],
                         dropout=opts['dropout'], learning_rate=opts['learning_rate'], seed=opts['seed'],
                         hidden=tuple(opts['hidden']))
    model = build_model(config=config, norm_stats=stats)
    model, curve = fit(model, prepare_arrays(train_df, stats), prepare_arrays(val_df, stats), config)

    path = args.out or _out(opts, 'model.json')
    save_model(model, path)
    curve.write_csv(_out(opts, 'learning_curve.csv'))
    test_mse = None
    if len(test_df):
        write_dataset(test_df, _out(opts, 'test_set.csv'))
        test_mse = evaluate(model, *prepare_arrays(test_df, stats))
    report = _report(args, opts, pc, model=path, widths=model.widths, n_parameters=model.n_parameters,
                     split={'train': len(train_df), 'validation': len(val_df), 'test': len(test_df)},
                     curve=curve_summary(curve), test_mse=test_mse)
    write_json(report, _out(opts, 'train_report.json'))


def cmd_design(args):
    opts = _options(args)
    pc = _constants(opts)
    model = load_model(args.model)
    targets = [DesignTarget(f1, f2, opts['threshold']) for f1, f2 in args.targets]
    ranges = ParamRanges()
    if len(targets) == 1:
        designs = [design(targets[0], model, opts['candidates'], opts['cross_section'], pc, opts['seed'],
                          ranges, args.tmm, opts['threads'])]
        network = None
    else:
        network, designs = design_filter(targets, model, opts['candidates'], opts['spacing'],
                                         opts['cross_section'], pc, opts['seed'], ranges, opts['threads'])

    grid = model.norm_stats.grid
    table = {'frequency': grid.frequencies}
    for t, ranked in zip(targets, designs):
        table[f"stl_{t.f1:g}_{t.f2:g}"] = stl_spectrum(ranked.best.eep, opts['cross_section'], pc, grid).values
    write_table(pd.DataFrame(table), _out(opts, f"design_spectrum.{opts['format']}"), opts['format'])

    report = _report(args, opts, pc, designs=[design_report(t, r, opts['top']) for t, r in zip(targets, designs)])
    if network is not None:
        write_network(network, _out(opts, 'filter.net'))
        spectrum = network_spectrum(network, grid, pc)
        write_table(pd.DataFrame({'frequency': spectrum.frequencies, 'stl': spectrum.values}),
                    _out(opts, f"filter_spectrum.{opts['format']}"), opts['format'])
        report['filter'] = {'network': _out(opts, 'filter.net'), 'peaks': spectrum_peaks(spectrum).tolist()}
    if args.sensitivity:
        best = designs[0].best
        smap = sensitivity_map(best.gp, targets[0], ('a1', 'a2'), opts['span'], opts['map_size'],
                               opts['cross_section'], pc, opts['threads'])
        write_sensitivity(smap, _out(opts, 'sensitivity_map.csv'))
        write_sensitivity(sensitivity_profile(best.gp, targets[0], opts['span'], opts['map_size'],
                                              opts['cross_section'], pc, opts['threads']),
                          _out(opts, 'sensitivity_profile.csv'))
        values = smap.values[np.isfinite(smap.values)]
        center = float(smap.values[smap.shape[0] // 2, smap.shape[1] // 2])
        report['sensitivity'] = {'center_aerf': center,
                                 'center_percentile': float(np.mean(values < center) * 100) if values.size else None}
    write_json(report, _out(opts, 'design_report.json'))


def cmd_optimize(args):
    opts = _options(args)
    pc = _constants(opts)
    elites = args.seed_elites or 0
    if (elites or args.paired) and args.model is None:
        raise ValidationError("--seed-elites and --paired require --model")
    model = load_model(args.model) if args.model is not None else None
    spec = ObjectiveSpec(args.targets[0], args.targets[1], opts['threshold'], opts['cross_section'])
    config = GAConfig(population_size=opts['population'], generations=opts['generations'], elite_count=elites,
                      elite_candidates=opts['elite_candidates'], tournament_size=opts['tournament_size'],
                      crossover_prob=opts['crossover_prob'], mutation_prob=opts['mutation_prob'],
                      mutation_scale=opts['mutation_scale'], elitism=opts['elitism'], penalty=opts['penalty'],
                      seed=opts['seed'])
    if args.paired:
        result = paired_runs(args.paired, config, spec, model, pc, threads=opts['threads'])
        for arm, trace in result.pop('traces').items():
            write_table(trace, _out(opts, f"ga_trace_{arm}.{opts['format']}"), opts['format'])
        write_json(_report(args, opts, pc, paired=result), _out(opts, 'ga_paired.json'))
        return
    best, trace, _ = optimize(config, spec, model, pc, threads=opts['threads'])
    write_table(trace, _out(opts, f"ga_trace.{opts['format']}"), opts['format'])
    write_json(_report(args, opts, pc, **ga_report(best, spec, config, pc)), _out(opts, 'ga_report.json'))


def cmd_tmm(args):
    opts = _options(args)
    pc = _constants(opts)
    network = read_network(args.network, pc)
    spectrum = network_spectrum(network, _grid(opts), pc)
    write_table(pd.DataFrame({'frequency': spectrum.frequencies, 'stl': spectrum.values}),
                _out(opts, f"tmm.{opts['format']}"), opts['format'])
    report = _report(args, opts, pc, network=args.network, cross_section=network.cross_section,
                     n_side_branches=len(network.side_branches()), peaks=spectrum_peaks(spectrum).tolist())
    write_json(report, _out(opts, 'tmm_report.json'))


def cmd_check(args):
    opts = _options(args)
    pc = _constants(opts)
    suites = SUITES if args.suite == 'all' else (args.suite,)
    results = run_checks(suites, opts['samples'], opts['seed'], pc, args.expect_fail)
    write_json(_report(args, opts, pc, expect_fail=args.expect_fail, results=[r.to_dict() for r in results]),
               _out(opts, 'check_report.json'))
    failed = [r.name for r in results if not r.passed]
    if args.expect_fail:
        missed = [r.name for r in results if r.passed]
        if missed:
            raise CheckFailedError(f"injected fault not detected by: {', '.join(missed)}")
    elif failed:
        raise CheckFailedError(f"failed checks: {', '.join(failed)}")


def cmd_verify(args):
    opts = _options(args)
    pc = _constants(opts)
    model = load_model(args.model)
    ds, summary = verify_model(model, read_datasets(args.datasets), opts['cross_section'], pc,
                               threads=opts['threads'])
    write_verification(ds, _out(opts, 'verification.csv'))
    write_json(_report(args, opts, pc, model=args.model, summary=summary), _out(opts, 'verify_report.json'))


def cmd_curve(args):
    curve = LearningCurve.read_csv(args.curve)
    print(json.dumps(jsonable(curve_summary(curve, args.average)), indent=2, sort_keys=True))


def _setup_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s', stream=sys.stderr, force=True)


def main(argv=None) -> int:
    args = get_parser().parse_args(argv)
    _setup_logging(args)
    try:
        args.func(args)
    except ThrDesignError as e:
        print(f"thr-design: error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"thr-design: error: {e}", file=sys.stderr)
        return 2
    return 0


def run():
    sys.exit(main())
