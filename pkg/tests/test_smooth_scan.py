import pytest
from mpmath import mp, mpf

from lib import smooth_scan
from lib.errors import DomainError, InvalidArtifact
from lib.phase_core import sonic_data
from lib.smooth_scan import (PLUS, RootRecord, ScanResult, extract_c, find_kappa_star, find_r_n, fit_nonsmooth,
                             kappa_parity_expected, nu_at, nu_interval, scan_kappa, smoothness_report)


PHI = mpf('2.37')


def synthetic(xi, c=mpf(2), a1=mpf('0.5'), a2=mpf('-0.3')):
    return c*abs(xi)**PHI + a1*xi + a2*xi**2


def geometric(lo, hi, n=30):
    return [mpf(lo)*(mpf(hi)/mpf(lo))**(mpf(i)/(n - 1)) for i in range(n)]


def test_fit_recovers_the_nonsmooth_coefficient():
    xi = geometric('1e-4', '1e-2')
    out = fit_nonsmooth(xi, [synthetic(x) for x in xi], PHI, n_terms=3)
    assert abs(out.coefficients[0] - 2) < mpf('1e-15')
    assert abs(out.coefficients[1] - mpf('0.5')) < mpf('1e-15')
    assert out.relative_residual < mpf('1e-20')
    assert out.condition_number > 1


def test_fit_on_the_negative_side_uses_the_sign_power():
    xi = [-x for x in geometric('1e-4', '1e-2')]
    # sgn(ξ)^1 |ξ|^φ with k = 1 flips the sign of the fitted coefficient
    out = fit_nonsmooth(xi, [synthetic(x) for x in xi], PHI, n_terms=3, k=1)
    assert abs(out.coefficients[0] + 2) < mpf('1e-15')


def test_fit_argument_checks():
    with pytest.raises(ValueError):
        fit_nonsmooth([mpf(1), mpf(2)], [mpf(1), mpf(2)], PHI, n_terms=5)
    with pytest.raises(ValueError):
        fit_nonsmooth([mpf(1)], [mpf(1)], PHI, n_terms=2)


@pytest.mark.parametrize('d, n, expected', [(3, 2, True), (3, 1, False), (4, 4, True), (2, 1, True), (2, 2, False)])
def test_kappa_parity(d, n, expected):
    assert kappa_parity_expected(d, n) is expected


def test_nu_intervals_bracket_the_integer_part():
    found = 0
    for k in (1, 2, 3):
        try:
            a, b = nu_interval(3, 2, k)
        except DomainError:
            continue
        found += 1
        assert a < b
        mid = nu_at(3, 2, (a + b)/2)
        assert k <= mid < k + 1
    assert found >= 1


def scan_with_two_roots(global_numbering=True):
    roots = [RootRecord(1, mpf('1.14'), mpf('2.3'), (mpf('1.13'), mpf('1.15'))),
             RootRecord(2, mpf('1.3'), mpf('3.4'), (mpf('1.29'), mpf('1.31')))]
    return ScanResult(3, mpf(2), roots, global_numbering=global_numbering,
                      sign_samples=[(mpf('1.13'), mpf('-0.2')), (mpf('1.15'), mpf('0.4'))])


def test_scan_result_serialization_keeps_roots():
    scan = scan_with_two_roots()
    scan.roots[0].kappa_star = mpf('0.11')
    scan.roots[0].parity_expected = False
    scan.roots[1].parity_expected = True
    restored = ScanResult.from_dict(scan.to_dict())
    assert restored.r_n_list == scan.r_n_list
    assert restored.global_numbering is True
    assert restored.roots[0].kappa_star == mpf('0.11')
    assert [root.parity_expected for root in restored.roots] == [False, True]
    assert restored.sign_samples == scan.sign_samples


@pytest.mark.parametrize('change', [
    lambda scan: setattr(scan.roots[1], 'r', mpf('1.1')),
    lambda scan: setattr(scan.roots[1], 'n', 3),
    lambda scan: setattr(scan.roots[0], 'r', mpf('0.9')),
    lambda scan: setattr(scan.roots[0], 'parity_expected', True),
    lambda scan: (setattr(scan, 'global_numbering', False), setattr(scan.roots[1], 'parity_expected', True)),
])
def test_scan_result_invariants(change):
    scan = scan_with_two_roots()
    change(scan)
    with pytest.raises(InvalidArtifact):
        ScanResult.from_dict(scan.to_dict())


def test_scan_result_schema_version():
    data = scan_with_two_roots().to_dict()
    data['schema_version'] = 1
    with pytest.raises(InvalidArtifact):
        ScanResult.from_dict(data)


@pytest.mark.parametrize('global_numbering, expected', [(True, [False, True]), (False, [None, None])])
def test_parity_only_with_global_numbering(monkeypatch, global_numbering, expected):
    monkeypatch.setattr(smooth_scan, 'find_kappa_star', lambda *args, **kwargs: None)
    scan = scan_kappa(scan_with_two_roots(global_numbering))
    assert [root.parity_expected for root in scan.roots] == expected
    assert [root.kappa_zero_found for root in scan.roots] == [False, False]


def test_window_above_the_first_band_is_not_globally_numbered(monkeypatch):
    # stand-in for c+ that changes sign in the middle of every band
    monkeypatch.setattr(smooth_scan, 'c_plus_at', lambda task: nu_at(task[0], task[1], task[2]) - task[3] - mpf('0.5'))
    scan = find_r_n(3, 2, nu_int_window=(2, 3), samples=6)
    assert scan.global_numbering is False
    assert [root.n for root in scan.roots] == list(range(1, len(scan.roots) + 1))
    for root in scan.roots:
        assert 2 <= root.nu < 4
    scan_kappa(scan)
    assert all(root.parity_expected is None for root in scan.roots)


def test_window_bounds_are_checked():
    with pytest.raises(DomainError):
        find_r_n(3, 2, nu_int_window=(0, 2))
    with pytest.raises(DomainError):
        find_r_n(3, 2, nu_int_window=(3, 2))


@pytest.mark.slow
def test_c_plus_of_a_generic_profile(interior_profile):
    nu = sonic_data(interior_profile.params).nu
    fit = extract_c(interior_profile, PLUS)
    assert fit.side == PLUS
    assert fit.nu_int == int(mp.floor(nu))
    assert fit.nu == nu
    assert mp.isfinite(fit.c_value)
    report = smoothness_report(interior_profile, PLUS)
    assert report['nu_int'] == fit.nu_int
    assert mpf(report['c_value']) == fit.c_value
    with pytest.raises(ValueError):
        extract_c(interior_profile, 'sideways')


@pytest.mark.slow
def test_smooth_solution_of_d3_ell2():
    # r_2 and kappa of the (3, 2) smooth solution
    scan = find_r_n(3, 2, (1, 3))
    near = [root for root in scan.roots if abs(root.r - mpf('1.143517')) < mpf('3e-6')]
    assert len(near) == 1
    if scan.global_numbering:
        assert near[0].n == 2
    kappa = find_kappa_star(3, 2, near[0].r)
    assert kappa is not None
    assert abs(kappa - mpf('0.11056')) < mpf('5e-5')


@pytest.mark.slow
def test_kappa_zeros_follow_the_parity_of_n_for_d3_ell3():
    scan = scan_kappa(find_r_n(3, 3, (1, 2)), samples=8)
    assert scan.roots
    for root in scan.roots:
        if scan.global_numbering:
            assert root.parity_expected == kappa_parity_expected(3, root.n)
            assert root.kappa_zero_found == root.parity_expected
        else:
            assert root.parity_expected is None
