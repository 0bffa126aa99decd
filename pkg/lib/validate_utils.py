# standard library
import csv
import os
from typing import Dict, List, Sequence, Tuple

# local
from lib.standard_column_order import VERIFY_COLUMNS



VERIFY_REPORT_FILENAME = 'verify_report.csv'


def read_report_from_dir(REPORT_DIR: str) -> Tuple[Dict[str, bool], int]:
    """Check name -> passed, and the total number of checks"""
    checks: Dict[str, bool]

    with open(os.path.join(REPORT_DIR, VERIFY_REPORT_FILENAME), 'r') as f:
        reader = csv.DictReader(f)
        checks = {f'{row["tier"]}:{row["check"]}': row['passed'] == 'True' for row in reader}
    total_checks = len(checks)
    return checks, total_checks


def write_report_to_dir(rows: Sequence[Sequence], REPORT_DIR: str):
    os.makedirs(REPORT_DIR, exist_ok=True)
    with open(os.path.join(REPORT_DIR, VERIFY_REPORT_FILENAME), 'w') as f:
        w = csv.writer(f)
        w.writerow(VERIFY_COLUMNS)
        for row in rows:
            w.writerow([str(v) for v in row])


def failed_checks(checks: Dict[str, bool]) -> List[str]:
    return [name for name, passed in checks.items() if not passed]
