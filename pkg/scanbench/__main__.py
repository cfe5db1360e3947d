#!/usr/bin/env python3
"""
Command line entry point: python3 -m scanbench <subcommand>

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import logging
import os
import sys
import argparse

from .main import log
from .main.config import load_scenario, load_training
from .main.exceptions import ConfigError, ScanbenchError

LOGGER = logging.getLogger('scanbench')


def command_demo(args):
    """Generate scripted demonstrations"""
    from .main.expert import generate_expert_demo, save_demo
    from .main.mesh import load_mesh

    config = load_scenario(args.config, args.set)
    mesh = load_mesh(config.mesh, config.scale)
    camera = config.camera.model()
    for index in range(args.count):
        seed = args.seed + index
        demo = generate_expert_demo(mesh, camera, seed, args.steps, min_steps=args.min_steps,
                                    noise_std=config.noise_std, jitter_deg=config.expert.jitter_deg,
                                    start_azimuth=config.expert.start_azimuth + 360.0 * index / args.count,
                                    motion_bound=config.motion_bound,
                                    radius_factor=config.expert.radius_factor,
                                    clearance=config.expert.clearance)
        directory = os.path.join(args.output, 'demo_' + config.object_name + '_' + str(seed))
        save_demo(demo, directory)
        LOGGER.info('demo written to %s', directory)
    return 0


def command_train(args):
    """Train a policy on stored demonstrations"""
    from .main.dataset import build_dataset
    from .main.expert import load_demo
    from .main.policy import ScanPolicy, save_policy, train

    config = load_training(args.config, args.set).validate()
    demos = [load_demo(directory) for directory in args.demos]
    dataset = build_dataset(demos, horizon=config.policy.horizon, history=config.policy.history,
                            extent=config.policy.grid_extent, cell_size=config.policy.cell_size)
    policy = ScanPolicy(config.policy, dataset.normalizer)
    losses = train(policy, dataset, config)
    save_policy(policy, args.output)
    LOGGER.info('final loss %.5f', losses[-1])
    return 0


def command_run(args):
    """Run a single episode"""
    from .main.episode import Episode
    from .main.occupancy import serialize
    from .main.pointcloud import write_ply

    config = load_scenario(args.config, args.set).validate()
    episode = Episode(config, seed=args.seed, init_pose_id=args.init_pose)
    record = episode.run()
    os.makedirs(args.output, exist_ok=True)
    with open(os.path.join(args.output, record.run_id + '.json'), 'w') as outfile:
        outfile.write(record.to_json())
    write_ply(os.path.join(args.output, record.run_id + '.ply'), episode.accumulator.cloud())
    with open(os.path.join(args.output, record.run_id + '.ogm'), 'wb') as outfile:
        outfile.write(serialize(episode.grid))
    print('coverage ' + '%.4f' % record.coverage_final + ' path_length_m ' + '%.4f' % record.path_length_m)
    return 0


def command_suite(args):
    """Run scenario files over their seeds and initial poses"""
    from .main.suite import run_suite

    configs = [load_scenario(path, args.set).validate() for path in args.configs]
    runner = run_suite(configs, args.output, workers=args.workers, plots=not args.no_plots)
    if runner.failures:
        LOGGER.warning('%d run(s) failed', len(runner.failures))
        return 2
    return 0


def command_eval(args):
    """Summarize stored run records"""
    from .main.episode import replay_path_length
    from .main.suite import load_records, plot_coverage, summarize

    records = load_records(args.records)
    if not records:
        raise ConfigError('no run records found in ' + args.records)
    for record in records:
        if abs(replay_path_length(record) - record.path_length_m) > 1e-6:
            LOGGER.warning('%s: logged path length disagrees with its poses', record.run_id)
    for entry in summarize([record.row() for record in records]):
        print('%-20s runs %3d  coverage %5.1f +- %4.1f %%  path %6.2f +- %5.2f m' % (
            entry['policy'], entry['runs'], 100 * entry['coverage_mean'], 100 * entry['coverage_std'],
            entry['path_mean'], entry['path_std']))
    if args.plot:
        os.makedirs(args.plot, exist_ok=True)
        for path in plot_coverage(records, args.plot):
            LOGGER.info('figure written to %s', path)
    return 0


def command_export(args):
    """Convert stored results: records to CSV, grids to PLY"""
    from .main.occupancy import deserialize
    from .main.pointcloud import PointCloud, write_ply
    from .main.suite import load_records, write_csv

    if args.records and args.csv:
        write_csv(args.csv, [record.row() for record in load_records(args.records)])
        LOGGER.info('csv written to %s', args.csv)
    if args.grid and args.ply:
        with open(args.grid, 'rb') as infile:
            grid = deserialize(infile.read())
        write_ply(args.ply, PointCloud(grid.occupied_centers(args.kappa)))
        LOGGER.info('occupied cells written to %s', args.ply)
    if not ((args.records and args.csv) or (args.grid and args.ply)):
        raise ConfigError('export needs --records with --csv, or --grid with --ply')
    return 0


def main():
    """This function is called when run as python3 -m ${MODULE}
    Parse arguments, configure logging and dispatch to a subcommand."""

    module_name = '.'.join(__loader__.name.split('.')[0:-1])

    argument_parser = argparse.ArgumentParser(
        prog=module_name,
        description='Simulated active 3D scanning with a diffusion policy and baselines'
    )
    argument_parser.add_argument('-v', '--verbose', action='store_true', help='debug output')
    argument_parser.add_argument('-q', '--quiet', action='store_true', help='warnings only')
    subparsers = argument_parser.add_subparsers(dest='command', required=True)

    def scenario_parser(name, handler, help_text):
        parser = subparsers.add_parser(name, help=help_text)
        parser.add_argument('config', action='store', help='scenario JSON file')
        parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                            help='override a config key, e.g. camera.preset=l515')
        parser.set_defaults(handler=handler)
        return parser

    parser = scenario_parser('demo', command_demo, 'generate scripted demonstrations')
    parser.add_argument('--count', type=int, default=3, help='number of demonstrations')
    parser.add_argument('--steps', type=int, default=200, help='steps per demonstration')
    parser.add_argument('--seed', type=int, default=0, help='seed of the first demonstration')
    parser.add_argument('--min-steps', type=int, default=18, help='horizon + history')
    parser.add_argument('--output', default='demos', help='output directory')

    parser = subparsers.add_parser('train', help='train a policy on demonstrations')
    parser.add_argument('demos', nargs='+', help='demonstration directories')
    parser.add_argument('--config', default=None, help='training JSON file')
    parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE')
    parser.add_argument('--output', default='policy.sdp', help='checkpoint file')
    parser.set_defaults(handler=command_train)

    parser = scenario_parser('run', command_run, 'run a single episode')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--init-pose', type=int, default=0, choices=(0, 1, 2))
    parser.add_argument('--output', default='run', help='output directory')

    parser = subparsers.add_parser('suite', help='run scenarios over seeds and initial poses')
    parser.add_argument('configs', nargs='+', help='scenario JSON files')
    parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE')
    parser.add_argument('--output', default='results', help='output directory')
    parser.add_argument('--workers', type=int, default=1)
    parser.add_argument('--no-plots', action='store_true')
    parser.set_defaults(handler=command_suite)

    parser = subparsers.add_parser('eval', help='summarize stored run records')
    parser.add_argument('records', help='suite output or records directory')
    parser.add_argument('--plot', default=None, help='write coverage figures to this directory')
    parser.set_defaults(handler=command_eval)

    parser = subparsers.add_parser('export', help='convert records to CSV or a grid to PLY')
    parser.add_argument('--records', default=None)
    parser.add_argument('--csv', default=None)
    parser.add_argument('--grid', default=None)
    parser.add_argument('--ply', default=None)
    parser.add_argument('--kappa', type=float, default=0.9, help='occupancy threshold')
    parser.set_defaults(handler=command_export)

    args = argument_parser.parse_args(sys.argv[1:])
    log.configure(1 if args.verbose else (-1 if args.quiet else 0))

    try:
        return args.handler(args)
    except ConfigError as error:
        LOGGER.error(error.__str__())
        return 1
    except (ScanbenchError, OSError) as error:
        LOGGER.error(error.__str__())
        return 2


if __name__ == '__main__':
    sys.exit(main())
