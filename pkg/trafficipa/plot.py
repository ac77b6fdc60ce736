'''Static SVG plots drawn from the result CSV files.

The CSV files are the results; the plots are only a convenient view of them.
'''

import logging
from pathlib import Path

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt

from .util import read_csv


logger = logging.getLogger(__name__)


def _save(figure, path):
    path = Path(path).resolve()
    path.parent.mkdir(parents = True, exist_ok = True)
    figure.savefig(path, format = 'svg')
    plt.close(figure)
    logger.info(f'Wrote {path}')
    return path


def plot_history(history_csv, cost_path, theta_path, title = ''):
    '''Plot the mean cost and the GREEN durations against the iteration.

    Parameters
    ----------
    history_csv : path-like object
        History CSV written by :meth:`Optimizer.write_history`.
    cost_path : path-like object
        Output SVG of the cost.
    theta_path : path-like object
        Output SVG of theta.

    Returns
    -------
    tuple of pathlib.Path
        Paths of the two SVG files.
    '''
    rows = read_csv(history_csv)
    iterations = [int(row['k']) for row in rows]

    figure, axes = plt.subplots(figsize = (6, 4))
    means = [float(row['F_mean']) for row in rows]
    stds  = [float(row['F_std']) for row in rows]
    axes.errorbar(iterations, means, yerr = stds, marker = 'o', markersize = 3, capsize = 2)
    axes.set_xlabel('iteration')
    axes.set_ylabel('mean cost')
    axes.set_title(title)
    axes.grid(True, alpha = 0.3)
    cost_file = _save(figure, cost_path)

    figure, axes = plt.subplots(figsize = (6, 4))
    for j in range(1, 5):
        axes.plot(iterations, [float(row[f'theta_{j}']) for row in rows], marker = '.', label = f'theta_{j}')
    axes.set_xlabel('iteration')
    axes.set_ylabel('GREEN duration [s]')
    axes.set_title(title)
    axes.legend()
    axes.grid(True, alpha = 0.3)
    theta_file = _save(figure, theta_path)
    return cost_file, theta_file


def plot_sweep(sweep_csv, path, title = ''):
    '''Plot the optimized cost against the segment length L for both transit models.

    Parameters
    ----------
    sweep_csv : path-like object
        Sweep CSV with the columns L, delay_mode, F_mean and F_se.
    path : path-like object
        Output SVG.
    '''
    rows = read_csv(sweep_csv)
    figure, axes = plt.subplots(figsize = (6, 4))
    for mode, label in (('with_delay', 'with delay'), ('no_delay', 'without delay')):
        selected = [row for row in rows if row['delay_mode'] == mode]
        if not selected:
            continue
        axes.errorbar([float(row['L']) for row in selected],
                      [float(row['F_mean']) for row in selected],
                      yerr = [float(row['F_se']) for row in selected],
                      marker = 'o', capsize = 3, label = label)
    axes.set_xlabel('L')
    axes.set_ylabel('optimized cost')
    axes.set_title(title)
    axes.legend()
    axes.grid(True, alpha = 0.3)
    return _save(figure, path)


def plot_histograms(histogram_csv, path, title = ''):
    '''Plot the distribution of every queue content at theta_0 and at theta*.

    Parameters
    ----------
    histogram_csv : path-like object
        Histogram CSV with the columns queue, value, fraction_theta0 and fraction_theta_star.
    path : path-like object
        Output SVG.
    '''
    rows   = read_csv(histogram_csv)
    queues = sorted({int(row['queue']) for row in rows}, key = lambda queue: (queue == 12, queue))
    figure, axes_list = plt.subplots(1, len(queues), figsize = (3 * len(queues), 3), squeeze = False)
    for axes, queue in zip(axes_list[0], queues):
        selected = [row for row in rows if int(row['queue']) == queue]
        values   = [int(row['value']) for row in selected]
        axes.bar(values, [float(row['fraction_theta0']) for row in selected],
                 width = 1.0, alpha = 0.5, label = 'theta_0')
        axes.bar(values, [float(row['fraction_theta_star']) for row in selected],
                 width = 1.0, alpha = 0.5, label = 'theta*')
        axes.set_title(f'queue {queue}')
        axes.set_xlabel('vehicles')
    axes_list[0][0].set_ylabel('fraction of time')
    axes_list[0][0].legend()
    figure.suptitle(title)
    figure.tight_layout()
    return _save(figure, path)
