"""
Batch evaluation: every (scenario, seed, initial pose) run, the metrics
CSV, per-run record/cloud/grid dumps, a markdown report and
coverage-vs-path-length figures.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import copy
import csv
import glob
import logging
import os
from concurrent.futures import ProcessPoolExecutor

# pylint: disable=E0401
import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # pylint: disable=C0413
import numpy as np
from jinja2 import Template

# pylint: disable=E0402
from .episode import Episode, RunRecord
from .exceptions import ScanbenchError
from .occupancy import serialize
from .pointcloud import write_ply

LOGGER = logging.getLogger(__name__)

CSV_COLUMNS = ('policy', 'object', 'scale', 'noise_std', 'fov_x', 'fov_y', 'seed', 'init_pose_id',
               'steps', 'coverage_final', 'path_length_m', 'poses_after_opt', 'runtime_s')
REPORT_TEMPLATE = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                               'etc', 'suite_report.md.j2')


def row_key(row):
    """Sort order of result rows"""
    return tuple(str(row[name]) for name in CSV_COLUMNS[:8])


def run_job(job):
    """Run one (config, seed, init_pose_id) job and write its artifacts.
    Return (row, error message)."""
    config, seed, init_pose_id, output_dir = job
    try:
        episode = Episode(config, seed=seed, init_pose_id=init_pose_id)
        record = episode.run()
        with open(os.path.join(output_dir, 'records', record.run_id + '.json'), 'w') as outfile:
            outfile.write(record.to_json())
        write_ply(os.path.join(output_dir, 'clouds', record.run_id + '.ply'), episode.accumulator.cloud())
        with open(os.path.join(output_dir, 'grids', record.run_id + '.ogm'), 'wb') as outfile:
            outfile.write(serialize(episode.grid))
        return record.row(), None
    except (ScanbenchError, OSError) as exception_error:
        return None, config.policy + ' ' + config.object_name + ' seed ' + str(seed) + ' pose ' \
            + str(init_pose_id) + ': ' + exception_error.__str__()


def write_csv(path, rows):
    """Write result rows sorted by their identifying columns"""
    with open(path, 'w', newline='') as outfile:
        writer = csv.DictWriter(outfile, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in sorted(rows, key=row_key):
            writer.writerow({name: row[name] for name in CSV_COLUMNS})


def read_csv(path):
    """Read result rows back"""
    with open(path, 'r', newline='') as infile:
        return list(csv.DictReader(infile))


def summarize(rows):
    """Per policy: run count and mean/std of coverage and path length"""
    groups = {}
    for row in rows:
        groups.setdefault(row['policy'], []).append(row)
    summary = []
    for policy in sorted(groups):
        coverage = np.array([float(row['coverage_final']) for row in groups[policy]])
        length = np.array([float(row['path_length_m']) for row in groups[policy]])
        summary.append({
            'policy': policy, 'runs': len(groups[policy]),
            'coverage_mean': float(coverage.mean()), 'coverage_std': float(coverage.std()),
            'path_mean': float(length.mean()), 'path_std': float(length.std()),
        })
    return summary


def load_records(directory):
    """All RunRecords stored under directory (or directory/records), sorted by run id"""
    if os.path.isdir(os.path.join(directory, 'records')):
        directory = os.path.join(directory, 'records')
    records = []
    for path in sorted(glob.glob(os.path.join(directory, '*.json'))):
        with open(path, 'r') as infile:
            records.append(RunRecord.from_json(infile.read()))
    return records


def plot_coverage(records, output_dir):
    """One coverage-vs-path-length PNG per object; return the written paths"""
    written = []
    objects = sorted({record.object for record in records})
    for name in objects:
        figure, axes = plt.subplots(figsize=(6.0, 4.0))
        policies = sorted({record.policy for record in records if record.object == name})
        colors = dict(zip(policies, plt.cm.tab10(np.linspace(0.0, 1.0, 10))))
        labeled = set()
        for record in records:
            if record.object != name or not record.coverage:
                continue
            steps = [step for step, _ in record.coverage]
            lengths = [record.path_lengths[step - 1] for step in steps]
            values = [100.0 * value for _, value in record.coverage]
            label = None if record.policy in labeled else record.policy
            labeled.add(record.policy)
            axes.plot(lengths, values, color=colors[record.policy], alpha=0.8, label=label)
        axes.set_xlabel('path length [m]')
        axes.set_ylabel('coverage [%]')
        axes.set_ylim(0.0, 100.0)
        axes.set_title(name)
        axes.legend(loc='lower right')
        figure.tight_layout()
        path = os.path.join(output_dir, 'coverage_' + name + '.png')
        figure.savefig(path, dpi=120)
        plt.close(figure)
        written.append(path)
    return written


class SuiteRunner():
    """Run scenario configs and collect their results in output_dir"""
    def __init__(self, output_dir, workers=1, template_file=REPORT_TEMPLATE):
        self.output_dir = output_dir
        self.workers = workers
        self.template_file = template_file
        self.rows = []
        self.failures = []

    def __info(self, message):
        LOGGER.info('suite "%s"->%s', self.output_dir, message)

    def prepare(self):
        """Create the output layout"""
        for name in ('records', 'clouds', 'grids'):
            os.makedirs(os.path.join(self.output_dir, name), exist_ok=True)
        return self

    def jobs(self, configs):
        """Expand configs into (config, seed, init_pose_id) jobs"""
        expanded = []
        for config in configs:
            for seed in config.seeds:
                for init_pose_id in config.init_pose_ids:
                    expanded.append((copy.deepcopy(config), int(seed), int(init_pose_id), self.output_dir))
        return expanded

    def run(self, configs):
        """Run every job; failed runs are logged and skipped"""
        jobs = self.jobs(configs)
        self.__info('running ' + str(len(jobs)) + ' episodes on ' + str(self.workers) + ' worker(s)')
        if self.workers > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as executor:
                results = list(executor.map(run_job, jobs))
        else:
            results = [run_job(job) for job in jobs]

        for row, error_message in results:
            if error_message is not None:
                LOGGER.warning('run failed: %s', error_message)
                self.failures.append(error_message)
            else:
                self.rows.append(row)
        return self

    def write_csv(self):
        """metrics.csv, sorted rows"""
        write_csv(os.path.join(self.output_dir, 'metrics.csv'), self.rows)
        return self

    def write_report(self):
        """Render suite_report.md from the template"""
        with open(self.template_file, 'r') as template_file:
            template = Template(template_file.read())
        rendered = template.render(ROWS=sorted(self.rows, key=row_key), SUMMARY=summarize(self.rows),
                                   FAILURES=self.failures, COLUMNS=CSV_COLUMNS)
        with open(os.path.join(self.output_dir, 'suite_report.md'), 'w') as output_file:
            output_file.write(rendered)
        return self

    def write_plots(self):
        """Coverage curves from the stored records"""
        plot_coverage(load_records(self.output_dir), self.output_dir)
        return self


def run_suite(configs, output_dir, workers=1, plots=True):
    """Run all configs; write metrics.csv, records, clouds, grids, the report and figures"""
    runner = SuiteRunner(output_dir, workers=workers).prepare().run(configs).write_csv().write_report()
    if plots and runner.rows:
        runner.write_plots()
    return runner
