import json

import pytest
from mpmath import mp, mpf

from lib.archive import INDEX_FILENAME, CorruptArtifact, RunArchive
from lib.errors import InvalidArtifact
from lib.file import decode_real, encode_real, read_json
from lib.mode_solver import ModeSolution, SmoothModeRecord, SpectrumScan, analytic_modes, mode_residual
from lib.phase_core import SCHEMA_VERSION
from lib.profile_solver import ProfileSolution
from lib.shock_fit import BlowUpReport, ShockFit


FIT = {'quantity': 'max_rho_Z', 'c': 1.5, 'tau_star': 6.3, 's': 1.0, 'tau_star_ci': [6.2, 6.4],
       's_ci': [0.9, 1.1], 'window': [0.5, 6.0], 'n_samples': 40, 'deviation_onset': None}


def report_payload(archive: RunArchive, **changes):
    profile = archive.store('profile', {'placeholder': 1})
    payload = {'schema_version': SCHEMA_VERSION, 'profile': profile, 'mode': None, 'epsilon': 0.01,
               'stop_reason': 'ramp', 'stop_tau': 6.25, 'steps': 1200, 'eps_noise': 1e-12,
               'fits': {'max_rho_Z': dict(FIT)}}
    payload.update(changes)
    return payload


def test_store_is_content_addressed(tmp_path):
    archive = RunArchive(str(tmp_path))
    payload = report_payload(archive)
    digest = archive.store('report', payload)
    assert digest == RunArchive.digest(dict(reversed(list(payload.items()))))
    assert archive.store('report', dict(payload)) == digest
    assert (tmp_path / 'report' / f'{digest}.json').is_file()


def test_metadata_index_and_typed_report(tmp_path):
    archive = RunArchive(str(tmp_path))
    payload = report_payload(archive)
    digest = archive.store('report', payload, {'seed': 3})
    record = archive.load_raw('report', digest)
    assert record['metadata']['precision'] == mp.dps
    assert record['metadata']['seed'] == 3
    assert record['payload'] == payload
    assert digest in read_json(str(tmp_path / INDEX_FILENAME))

    report = archive.load('report', digest)
    assert isinstance(report, BlowUpReport)
    assert report.stop_reason == 'ramp'
    assert report.fits['max_rho_Z'] == ShockFit.from_dict(FIT)
    assert report.fits['max_rho_Z'].tau_star_ci == (6.2, 6.4)
    assert RunArchive.digest(report.to_dict()) == digest


def test_tampered_payload_is_detected(tmp_path):
    archive = RunArchive(str(tmp_path))
    digest = archive.store('report', report_payload(archive))
    path = archive.path('report', digest)
    record = read_json(path)
    record['payload']['stop_tau'] = 7.0
    with open(path, 'w') as f:
        json.dump(record, f)
    with pytest.raises(CorruptArtifact):
        archive.load('report', digest)


def test_unknown_kind(tmp_path):
    with pytest.raises(ValueError):
        RunArchive(str(tmp_path)).store('plot', {'x': 1})


def test_invalid_report_is_refused(tmp_path):
    archive = RunArchive(str(tmp_path))
    digest = archive.store('report', {'stop_reason': 'bogus', 'fits': 7})
    with pytest.raises(InvalidArtifact):
        archive.load('report', digest)

    for changes in ({'stop_reason': 'bogus'}, {'fits': 7}, {'schema_version': SCHEMA_VERSION - 1},
                    {'fits': {'min_u_Z': dict(FIT)}}, {'steps': -1}):
        digest = archive.store('report', report_payload(archive, **changes))
        with pytest.raises(InvalidArtifact):
            archive.load('report', digest)


def test_report_needs_its_profile_in_the_archive(tmp_path):
    archive = RunArchive(str(tmp_path))
    digest = archive.store('report', report_payload(archive, profile='0'*64))
    with pytest.raises(InvalidArtifact):
        archive.load('report', digest)


def test_shock_fit_invariants():
    with pytest.raises(InvalidArtifact):
        ShockFit.from_dict({**FIT, 'tau_star': 5.0, 'tau_star_ci': [4.9, 5.1]})
    with pytest.raises(InvalidArtifact):
        ShockFit.from_dict({**FIT, 's_ci': [1.2, 1.3]})
    with pytest.raises(InvalidArtifact):
        ShockFit.from_dict({**FIT, 'n_samples': 3})
    with pytest.raises(InvalidArtifact):
        ShockFit.from_dict({k: v for k, v in FIT.items() if k != 's'})


def test_spectrum_round_trip(tmp_path):
    archive = RunArchive(str(tmp_path))
    scan = SpectrumScan([SmoothModeRecord(mpf('1.2'), None, mpf('0.77')),
                         SmoothModeRecord(mpf('0.5'), mpf('-1.5'), mpf('3.25'))],
                        [(mpf('0.5'), mpf('3.25'), mpf('-0.01'))])
    payload = {'profile': archive.store('profile', {'placeholder': 1}), **scan.to_dict()}
    restored = archive.load('spectrum', archive.store('spectrum', payload))
    assert [m.Omega for m in restored.modes] == [mpf('1.2'), mpf('0.5')]
    assert restored.modes[1].theta == mpf('-1.5')
    assert restored.samples == scan.samples


def test_spectrum_modes_have_to_decrease():
    scan = SpectrumScan([SmoothModeRecord(mpf('0.5'), None, mpf('3')), SmoothModeRecord(mpf('1.2'), None, mpf('1'))])
    with pytest.raises(InvalidArtifact):
        SpectrumScan.from_dict(scan.to_dict())


@pytest.mark.slow
def test_profile_round_trip_and_invariants(tmp_path, interior_profile):
    archive = RunArchive(str(tmp_path))
    payload = interior_profile.to_dict()
    restored = archive.load('profile', archive.store('profile', payload))
    assert isinstance(restored, ProfileSolution)
    assert restored.delta == interior_profile.delta
    assert list(restored.omega1) == list(interior_profile.omega1)
    assert restored.grid1.N == interior_profile.grid1.N

    payload['omega1'][0] = encode_real(decode_real(payload['omega1'][0]) + mpf('0.01'))
    with pytest.raises(InvalidArtifact):
        archive.load('profile', archive.store('profile', payload))


@pytest.mark.slow
def test_mode_round_trip_keeps_its_profile(tmp_path, interior_profile):
    archive = RunArchive(str(tmp_path))
    profile_digest = archive.store('profile', interior_profile.to_dict())
    _, gauge = analytic_modes(interior_profile)
    payload = gauge.to_dict(profile_digest)
    assert payload['profile_digest'] == profile_digest
    restored = archive.load('mode', archive.store('mode', payload))
    assert isinstance(restored, ModeSolution)
    assert restored.params == gauge.params
    assert list(restored.alpha1) == list(gauge.alpha1)
    assert list(restored.derivatives['alpha1']) == list(gauge.derivatives['alpha1'])
    assert mode_residual(restored) < mpf('1e-12')

    orphan = archive.store('mode', gauge.to_dict(None))
    with pytest.raises(InvalidArtifact):
        archive.load('mode', orphan)
