# standard library
from typing import Dict, Iterable, List, Sequence
import os
import csv
import gzip
import json

# third-party libraries
import magic
import numpy as np
from mpmath import mp, mpf

# local
from lib.errors import UnsupportedFileType


def file_exists(path: str):
    return os.path.isfile(path)

def get_file_size_bytes(path: str) -> int:
    return os.path.getsize(path)


def file_size_human(size_in_B: int, verbose: bool = True):
    """
    Only displays either in MB or B
    """
    size_in_MiB: float = (size_in_B/1024)/1024
    if size_in_MiB < 1:
        size_in_MiB_str = "<1 MB"
    else:
        size_in_MiB_str = f"{int(size_in_MiB+1)} MB"
    if verbose:
        return f"{size_in_MiB_str} ({size_in_B} B)"
    else :
        return size_in_MiB_str



##### reals as decimal strings #####

def encode_real(x) -> str:
    """
    Decimal string that reads back to the same value at the current precision.
    Python floats keep their shortest repr.
    """
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return mp.nstr(mpf(x), mp.dps + 3)

def decode_real(s) -> mpf:
    if isinstance(s, (int, float)):
        return mpf(repr(s)) if isinstance(s, float) else mpf(s)
    return mpf(str(s))

def encode_array(values: Iterable) -> List[str]:
    return [encode_real(v) for v in values]

def decode_array(values: Sequence) -> np.ndarray:
    return np.array([decode_real(v) for v in values], dtype=object)



##### files #####

GZIP_MIMES = ('application/gzip', 'application/x-gzip')
TEXT_MIMES = ('application/json', 'application/csv')
EMPTY_MIMES = ('inode/x-empty', 'application/x-empty')


def file_mime(path: str) -> str:
    return magic.from_file(os.path.realpath(path), mime=True)


def open_maybe_gz(path: str, mode: str = 'r'):
    """
    Text handle on a plain or gzipped file. Reads go by the content type
    sniffed with libmagic, whatever the name; writes gzip when the name ends
    with .gz.
    """
    if 'r' not in mode:
        if str(path).endswith('.gz'):
            return gzip.open(path, mode if "t" in mode else mode + "t", newline="")
        return open(path, mode, newline='')

    if not file_exists(path):
        raise FileNotFoundError(f"Failed attempt to open file at path: {path}")

    mime: str = file_mime(path)
    if mime in GZIP_MIMES:
        return gzip.open(path, 'rt', newline='', encoding='utf-8')
    elif mime.startswith('text/') or mime in TEXT_MIMES or mime in EMPTY_MIMES:
        return open(path, 'r', newline='', encoding='utf-8')
    else:
        raise UnsupportedFileType(str(path), mime)


def write_json(path: str, payload: Dict):
    with open_maybe_gz(path, 'w') as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write('\n')

def read_json(path: str) -> Dict:
    with open_maybe_gz(path, 'r') as f:
        return json.load(f)

def canonical_json(payload: Dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(',', ':')).encode('utf-8')


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Sequence]):
    """Rows are written in `columns` order; reals go through `encode_real`"""
    with open_maybe_gz(path, 'w') as f:
        w = csv.writer(f)
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f'row has {len(row)} fields, expected {len(columns)}')
            w.writerow([v if isinstance(v, (str, bool)) or v is None else encode_real(v) for v in row])

def read_csv(path: str) -> Dict[str, List[str]]:
    with open_maybe_gz(path, 'r') as f:
        reader = csv.reader(f)
        header = next(reader)
        columns: Dict[str, List[str]] = {c: [] for c in header}
        for row in reader:
            for c, v in zip(header, row):
                columns[c].append(v)
    return columns
