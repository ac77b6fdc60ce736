import csv
from pathlib import Path

import numpy as np


def derive_seeds(base_seed, count, stream = 0):
    '''Derive ``count`` independent integer seeds from a base seed.

    The same (base_seed, stream) pair always gives the same seeds, and different streams
    give unrelated seeds. It is used to draw the replication seeds of one optimizer
    iteration.

    Examples
    --------
    >>> derive_seeds(1, 3) == derive_seeds(1, 3)
    True
    >>> len(set(derive_seeds(1, 10)))
    10
    >>> derive_seeds(1, 2, stream = 0) != derive_seeds(1, 2, stream = 1)
    True
    '''
    if count < 0:
        raise ValueError(f'count must be non-negative, but it was {count}')
    children = np.random.SeedSequence([int(base_seed), int(stream)]).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def write_csv(path, header, rows):
    '''Write rows to a CSV file, creating the parent directory if needed.

    Parameters
    ----------
    path : path-like object
        Output file.
    header : sequence of str
        Column names.
    rows : iterable of sequence
        Data rows.

    Returns
    -------
    pathlib.Path
        Absolute path of the written file.
    '''
    path = Path(path).resolve()
    path.parent.mkdir(parents = True, exist_ok = True)
    with open(path, 'w', newline = '') as output_file:
        writer = csv.writer(output_file)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    return path


def read_csv(path):
    '''Read a CSV file written by :func:`write_csv` as a list of dicts.'''
    with open(path, newline = '') as input_file:
        return list(csv.DictReader(input_file))
