import numpy as np
import pytest

from trdma import channel, link, precoder, utils
from trdma.channel import ChannelSpec
from trdma.errors import ConfigError, DimensionMismatchError
from trdma.signals import ComplexSequence, max_abs_diff

SEEDS = range(1, 31)


def test_tr_precoder_support_and_energy(small_bank):
    seqs = precoder.tr_precoder(small_bank, 1)
    assert len(seqs) == small_bank.n_antennas
    assert all(s.start == 0 and len(s) == small_bank.n_taps for s in seqs)
    assert sum(np.vdot(s.taps, s.taps).real for s in seqs) == pytest.approx(1.0, rel=1e-12)
    h = channel.normalized_taps(small_bank, 1)
    np.testing.assert_allclose(seqs[2].taps, np.conj(h[2, ::-1]), rtol=1e-12)


def test_correlation_bank_is_the_tr_field(small_bank):
    bank = precoder.normalized_correlation_bank(small_bank)
    l = small_bank.n_taps
    assert bank[0][0][0] == pytest.approx(1.0)
    tr = precoder.build_precoders(small_bank, precoder.KIND_TR)
    eq = link.equivalent_channel(small_bank, tr)
    #Through the un-normalized channel the field of user i's TR precoder at user j
    #is the normalized correlation scaled by user j's root energy.
    for j in range(2):
        for i in range(2):
            scale = channel.user_root_energy(small_bank, j)
            for tau in (-(l - 1), -3, 0, 5, l - 1):
                assert eq.w[j][i][tau + l - 1] == pytest.approx(scale * bank[j][i][tau], abs=1e-12)
    arr = precoder.correlation_array(small_bank, bank)
    assert arr.shape == (2, 2, 2 * l - 1)
    assert arr[1, 0, l + 2] == bank[1][0][3]


def test_zero_iterations_equal_tr_exactly():
    for seed in SEEDS:
        bank = channel.generate_synthetic(ChannelSpec(seed=seed))
        tr = precoder.build_precoders(bank, precoder.KIND_TR)
        itr = precoder.build_precoders(bank, precoder.KIND_ITRDMA, n_max=0)
        assert itr.iterations_used == (0, 0)
        for i0 in range(bank.n_users):
            for a, b in zip(tr.sequences[i0], itr.sequences[i0]):
                assert max_abs_diff(a, b) <= 1e-12
                assert a.start == b.start and np.array_equal(a.taps, b.taps)
        eq_tr = link.equivalent_channel(bank, tr)
        eq_itr = link.equivalent_channel(bank, itr)
        for i in range(bank.n_users):
            assert link.sir(eq_tr, i) == link.sir(eq_itr, i)


def test_tr_peak_equals_root_bank_energy():
    for seed in SEEDS:
        bank = channel.generate_synthetic(ChannelSpec(seed=seed))
        eq = link.equivalent_channel(bank, precoder.build_precoders(bank, precoder.KIND_TR))
        for i in range(bank.n_users):
            peak = eq.w[i][i][eq.peak_index]
            assert abs(peak - channel.user_root_energy(bank, i)) <= 1e-9 * channel.user_root_energy(bank, i)


@pytest.mark.slow
def test_residual_tracks_the_actual_field():
    for seed in SEEDS:
        bank = channel.generate_synthetic(ChannelSpec(seed=seed))
        state = precoder.ItrdmaState(bank, 0)
        assert precoder.residual_consistency_check(bank, 0, state.precoder(), state.delta) <= 1e-9
        l = bank.n_taps
        for _ in range(50):
            entry = state.step()
            assert abs(state.delta[entry.user, entry.lag + l - 1]) <= 1e-12
            assert precoder.residual_consistency_check(bank, 0, state.precoder(), state.delta) <= 1e-9


def test_consistency_check_detects_a_wrong_residual(small_bank):
    state = precoder.ItrdmaState(small_bank, 1).run(n_max=5)
    delta = np.array(state.delta)
    delta[0, 3] += 1e-3
    assert precoder.residual_consistency_check(small_bank, 1, state.precoder(), delta) >= 1e-3 * 0.999
    with pytest.raises(DimensionMismatchError):
        precoder.residual_consistency_check(small_bank, 1, state.precoder(), delta[:, :-1])


def test_selection_tie_break():
    bank = channel.generate_synthetic(ChannelSpec(n_users=2, n_antennas=2, n_taps=8, seed=1))
    state = precoder.ItrdmaState(bank, 0)
    l = bank.n_taps
    state.delta[:] = 0
    state.delta[1, -2 + l - 1] = 0.5
    state.delta[0, 3 + l - 1] = -0.5j
    assert state.select() == (1, -2)
    state.delta[0, -2 + l - 1] = 0.5
    assert state.select() == (0, -2)


def test_trace_numbering_and_selected_values(small_bank):
    precs, grid = precoder.itrdma_precoder(small_bank, 0, epsilon=0.0, n_max=6)
    assert [e.n for e in grid.trace] == [1, 2, 3, 4, 5, 6]
    assert all(e.max_abs_after == pytest.approx(grid.max_abs()) for e in grid.trace[-1:])
    first = grid.trace[0]
    corr = precoder.correlation_array(small_bank)
    initial = np.array(corr[:, 0, :])
    initial[0, small_bank.n_taps - 1] -= 1.0
    assert first.value == initial[first.user, first.lag + small_bank.n_taps - 1]
    assert abs(first.value) == pytest.approx(np.max(np.abs(initial)))


def test_precoder_support_is_trimmed_to_touched_lags(small_bank):
    precs, grid = precoder.itrdma_precoder(small_bank, 1, epsilon=0.0, n_max=10)
    lags = [e.lag for e in grid.trace]
    l = small_bank.n_taps
    lo, hi = min(0, min(lags)), max(l - 1, l - 1 + max(lags))
    for s in precs:
        assert s.start == lo
        assert s.end == hi + 1
    assert sum(np.vdot(s.taps, s.taps).real for s in precs) == pytest.approx(1.0, rel=1e-12)


def test_stopping_rules(small_bank):
    _, grid = precoder.itrdma_precoder(small_bank, 0, epsilon=10.0, n_max=50)
    assert grid.trace == []
    _, grid = precoder.itrdma_precoder(small_bank, 0, epsilon=0.0, n_max=4)
    assert len(grid.trace) == 4
    pset = precoder.build_precoders(small_bank, precoder.KIND_ITRDMA, epsilon=1e-3, n_max=30)
    for i0, used in enumerate(pset.iterations_used):
        assert used <= 30
        if used < 30:
            assert pset.residuals[i0].max_abs() <= 1e-3


def test_cancellation_shrinks_the_in_window_residual(small_bank):
    state = precoder.ItrdmaState(small_bank, 0)
    before = state.max_abs()
    state.run(epsilon=0.0, n_max=40)
    assert state.max_abs() < before


def test_orthogonal_delta_channels_need_no_iterations(delta_bank):
    bank = delta_bank(n_users=2, n_antennas=2, n_taps=8)
    pset = precoder.build_precoders(bank, precoder.KIND_ITRDMA, n_max=50)
    assert pset.iterations_used == (0, 0)
    assert pset.sequences[1][1] == ComplexSequence(7, [1.0])
    assert pset.sequences[1][0] == ComplexSequence.empty()


def test_checkpoints_match_separate_runs(small_bank):
    snaps = precoder.itrdma_checkpoints(small_bank, 0, [0, 3, 9], epsilon=0.0)
    assert sorted(snaps) == [0, 3, 9]
    for n in (0, 3, 9):
        seqs, _ = precoder.itrdma_precoder(small_bank, 0, epsilon=0.0, n_max=n)
        assert snaps[n][1] == n
        for a, b in zip(snaps[n][0], seqs):
            assert a.start == b.start and np.array_equal(a.taps, b.taps)


def test_parallel_build_is_identical(three_user_bank):
    serial = precoder.build_precoders(three_user_bank, "itrdma", n_max=12, n_jobs=1)
    parallel = precoder.build_precoders(three_user_bank, "itrdma", n_max=12, n_jobs=2)
    assert serial == parallel


@pytest.mark.parametrize("kwargs, error", [
    ({"kind": "zf"}, ConfigError),
    ({"epsilon": -1.0}, ConfigError),
    ({"n_max": -2}, ConfigError),
    ({"n_max": 2.5}, ConfigError),
])
def test_build_rejects_bad_parameters(small_bank, kwargs, error):
    with pytest.raises(error):
        precoder.build_precoders(small_bank, **kwargs)


def test_unknown_target_user(small_bank):
    with pytest.raises(DimensionMismatchError):
        precoder.tr_precoder(small_bank, 2)
    with pytest.raises(DimensionMismatchError):
        precoder.itrdma_precoder(small_bank, -1)


def test_transmit_waveforms_superpose_users(small_bank):
    pset = precoder.build_precoders(small_bank, precoder.KIND_TR)
    out = precoder.transmit_waveforms(pset, [[1.0], [0.0]])
    for m in range(small_bank.n_antennas):
        assert out[m] == pset.sequences[0][m]
    both = precoder.transmit_waveforms(pset, [[1.0, -1.0], [1j]], symbol_spacing=2)
    expected = pset.sequences[0][0] - pset.sequences[0][0].shift(2) + 1j * pset.sequences[1][0]
    assert max_abs_diff(both[0], expected) <= 1e-15
    with pytest.raises(DimensionMismatchError):
        precoder.transmit_waveforms(pset, [[1.0]])


@pytest.mark.parametrize("name", ["p.pre", "p.json"])
def test_store_and_load(tmp_path, small_bank, name):
    pset = precoder.build_precoders(small_bank, precoder.KIND_ITRDMA, n_max=7)
    path = str(tmp_path / name)
    precoder.store(pset, path)
    assert precoder.load(path) == pset


def test_trace_csv(tmp_path, small_bank):
    pset = precoder.build_precoders(small_bank, precoder.KIND_ITRDMA, epsilon=0.0, n_max=3)
    path = str(tmp_path / "trace.csv")
    precoder.write_trace_csv(pset, path, ["note"])
    comments, rows = utils.read_csv(path)
    assert comments == ["note"]
    assert len(rows) == 6
    assert [r["n"] for r in rows] == ["1", "2", "3", "1", "2", "3"]
    assert [r["target"] for r in rows[:3]] == ["0", "0", "0"]
    assert tuple(rows[0]) == precoder.TRACE_COLUMNS


def test_correlation_of_delayed_spikes():
    taps = np.zeros((2, 1, 8), dtype=np.complex128)
    taps[0, 0, 0] = 1.0
    taps[1, 0, 5] = 1.0
    bank = precoder.normalized_correlation_bank(channel.CirSet(taps, 1e-8, 0.15))
    assert bank[0][1][-5] == pytest.approx(1.0)
    assert bank[0][1][0] == 0j
    assert bank[1][0][5] == pytest.approx(1.0)
    assert bank[0][0] == ComplexSequence.delta(0)


def test_correlation_bank_is_hermitian(three_user_bank):
    arr = precoder.correlation_array(three_user_bank)
    #R~[j][i](tau) = conj(R~[i][j](-tau))
    np.testing.assert_allclose(arr, np.conj(np.transpose(arr, (1, 0, 2))[:, :, ::-1]), atol=1e-12)


def test_repeated_runs_give_identical_traces(small_bank):
    a = precoder.itrdma_precoder(small_bank, 0, n_max=15)[1].trace
    b = precoder.itrdma_precoder(small_bank, 0, n_max=15)[1].trace
    assert len(a) == 15
    assert a == b
