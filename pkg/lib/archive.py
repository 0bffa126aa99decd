# standard library
from datetime import datetime, timezone
from typing import Callable, Dict, Optional
import hashlib
import logging
import os
import threading

# third-party libraries
from mpmath import mp

# local
from lib import __version__
from lib.errors import InvalidArtifact
from lib.file import canonical_json, file_exists, file_size_human, get_file_size_bytes, read_json, write_json
from lib.mode_solver import ModeSolution, SpectrumScan
from lib.profile_solver import ProfileSolution
from lib.shock_fit import BlowUpReport
from lib.smooth_scan import ScanResult


logger = logging.getLogger(__name__)

INDEX_FILENAME = 'index.json'



class CorruptArtifact(InvalidArtifact):
    pass


def _require(archive: 'RunArchive', kind: str, digest: Optional[str], owner: str):
    if digest is None or not file_exists(archive.path(kind, digest)):
        raise InvalidArtifact(f'{owner}: referenced {kind} {digest} is not in the archive')


def _load_mode(payload: Dict, archive: 'RunArchive') -> ModeSolution:
    digest = payload.get('profile_digest') if isinstance(payload, dict) else None
    _require(archive, 'profile', digest, 'mode')
    return ModeSolution.from_dict(payload, archive.load('profile', digest))


def _load_spectrum(payload: Dict, archive: 'RunArchive') -> SpectrumScan:
    scan = SpectrumScan.from_dict(payload)
    _require(archive, 'profile', payload.get('profile'), 'spectrum')
    if payload.get('zero_mode') is not None:
        _require(archive, 'mode', payload['zero_mode'], 'spectrum')
    return scan


def _load_report(payload: Dict, archive: 'RunArchive') -> BlowUpReport:
    report = BlowUpReport.from_dict(payload)
    _require(archive, 'profile', report.profile, 'report')
    if report.mode is not None:
        _require(archive, 'mode', report.mode, 'report')
    return report


LOADERS: Dict[str, Callable[[Dict, 'RunArchive'], object]] = {
    'profile': lambda payload, _: ProfileSolution.from_dict(payload),
    'scan': lambda payload, _: ScanResult.from_dict(payload),
    'spectrum': _load_spectrum,
    'mode': _load_mode,
    'report': _load_report,
}


class RunArchive:
    """
    Content-addressed store under `root`: <kind>/<sha256>.json holds
    {"metadata": ..., "payload": ...}; the digest covers the payload only, so
    identical numerics at identical precision land on the same file.
    """
    _lock = threading.Lock()

    def __init__(self, root: str):
        self.root = str(root)
        os.makedirs(self.root, exist_ok=True)

    @staticmethod
    def digest(payload: Dict) -> str:
        return hashlib.sha256(canonical_json(payload)).hexdigest()

    def path(self, kind: str, digest: str) -> str:
        return os.path.join(self.root, kind, f'{digest}.json')

    def store(self, kind: str, payload: Dict, extra: Optional[Dict] = None) -> str:
        if kind not in LOADERS:
            raise ValueError(f'unknown artifact kind "{kind}"')
        digest = self.digest(payload)
        metadata = {
            'kind': kind,
            'created': datetime.now(timezone.utc).isoformat(),
            'code_version': __version__,
            'precision': mp.dps,
            **(extra or {}),
        }
        with self._lock:
            os.makedirs(os.path.join(self.root, kind), exist_ok=True)
            path = self.path(kind, digest)
            if not file_exists(path):
                write_json(path, {'metadata': metadata, 'payload': payload})
                logger.debug(f'stored {kind} {digest} ({file_size_human(get_file_size_bytes(path))})')
            index = self.index()
            index[digest] = metadata
            write_json(os.path.join(self.root, INDEX_FILENAME), index)
        return digest

    def index(self) -> Dict[str, Dict]:
        path = os.path.join(self.root, INDEX_FILENAME)
        return read_json(path) if file_exists(path) else {}

    def load_raw(self, kind: str, digest: str) -> Dict:
        record = read_json(self.path(kind, digest))
        if not isinstance(record, dict) or 'payload' not in record or 'metadata' not in record:
            raise CorruptArtifact(f'{kind} {digest}: not an archive record')
        if self.digest(record['payload']) != digest:
            raise CorruptArtifact(f'{kind} {digest}: payload does not match its digest')
        return record

    def load(self, kind: str, digest: str):
        """
        Reads, checks the digest and rebuilds the artifact at its recorded
        precision; the typed loaders check the schema version, the invariants
        of the artifact and that every digest it references is stored.
        """
        if kind not in LOADERS:
            raise ValueError(f'unknown artifact kind "{kind}"')
        record = self.load_raw(kind, digest)
        with mp.workdps(int(record['metadata'].get('precision', mp.dps))):
            return LOADERS[kind](record['payload'], self)
