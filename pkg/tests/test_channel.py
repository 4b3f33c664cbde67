import numpy as np
import pytest
from hypothesis import given, strategies as st

from losalign.channel import (
    ChannelInstance,
    DPathChannel,
    NormalizedChannel,
    expand_dpath,
    normalize,
    quantize_delays,
    sample_channel,
)
from losalign.errors import DomainError


class TestQuantizeDelays:
    def test_zero_delays(self):
        taus = np.zeros((2, 2))
        l, big_l = quantize_delays(taus, w_hz=1e6, t_d=1e-5)
        assert np.all(l == 0)
        assert big_l == 11

    def test_rounds_down_below_half(self):
        t_d = 1e-5
        taus = np.full((1, 1), 0.349999 * t_d)
        l, big_l = quantize_delays(taus, w_hz=1e6, t_d=t_d)
        assert l[0, 0] == 3
        assert big_l == 11

    def test_half_rounds_up(self):
        t_d = 1e-5
        taus = np.full((1, 1), 0.35 * t_d)
        l, big_l = quantize_delays(taus, w_hz=1e6, t_d=t_d)
        assert l[0, 0] == 4
        assert big_l == 11

    def test_out_of_range_names_index(self):
        taus = np.array([[0.0, 2e-5], [0.0, 0.0]])
        with pytest.raises(DomainError, match=r"\(0, 1\)"):
            quantize_delays(taus, w_hz=1e6, t_d=1e-5)

    def test_quantized_delays_within_range(self):
        rng = np.random.default_rng(0)
        t_d = 3.7e-6
        taus = rng.uniform(0, t_d, size=(4, 4)) * 0.999999
        l, big_l = quantize_delays(taus, w_hz=2.3e6, t_d=t_d)
        assert l.min() >= 0 and l.max() <= big_l - 1


class TestNormalize:
    def test_fig1_zero_direct_delays(self, fig1_nc):
        l = np.array([[0, 1, 3], [3, 0, 0], [1, 4, 0]])
        ch = ChannelInstance(K=3, L=5, l=l, h=np.ones((3, 3)))
        nc = normalize(ch)
        assert np.array_equal(nc.lp, fig1_nc.lp)

    def test_constant_delays_cancel(self):
        ch = ChannelInstance(K=3, L=8, l=np.full((3, 3), 5), h=np.ones((3, 3)))
        assert np.all(normalize(ch).lp == 0)

    def test_single_offset(self):
        l = np.array([[2, 0], [3, 0]])
        ch = ChannelInstance(K=2, L=4, l=l, h=np.ones((2, 2)))
        nc = normalize(ch)
        assert nc.lp[1, 0] == 1

    def test_rate_weights(self):
        ch = ChannelInstance(K=2, L=2, l=np.zeros((2, 2), dtype=int),
                             h=np.ones((2, 2)), psd_over_n0=1.0)
        assert np.allclose(normalize(ch).r, 1.0)       # log2(1 + 1) = 1

    def test_idempotent_on_zero_diagonal(self):
        rng = np.random.default_rng(1)
        l = rng.integers(0, 5, (3, 3))
        np.fill_diagonal(l, 0)
        ch = ChannelInstance(K=3, L=5, l=l, h=np.ones((3, 3)))
        nc = normalize(ch)
        assert np.array_equal(nc.lp, l)

    @given(st.integers(0, 6), st.data())
    def test_column_shift_invariance(self, c, data):
        base = data.draw(
            st.lists(st.lists(st.integers(0, 3), min_size=2, max_size=2),
                     min_size=2, max_size=2)
        )
        l = np.array(base)
        ch1 = ChannelInstance(K=2, L=11, l=l, h=np.ones((2, 2)))
        shifted = l.copy()
        shifted[:, 1] += c
        ch2 = ChannelInstance(K=2, L=11, l=shifted, h=np.ones((2, 2)))
        assert np.array_equal(normalize(ch1).lp, normalize(ch2).lp)


class TestExpandDPath:
    def test_single_path_is_identity(self):
        rng = np.random.default_rng(2)
        l = rng.integers(0, 4, (3, 3, 1))
        h = np.exp(1j * rng.uniform(0, 1, (3, 3, 1)))
        dch = DPathChannel(K=3, D=1, L=4, l=l, h=h)
        inst, mapping = expand_dpath(dch)
        assert inst.K == 3
        assert np.array_equal(inst.l, l[:, :, 0])
        assert np.array_equal(inst.h, h[:, :, 0])
        assert mapping.data_virtual == (0, 1, 2)

    def test_two_user_two_path_matrices(self):
        # hand-constructed expansion: virtual tx (j, e) uses path e of each
        # link, so column blocks repeat path delays across the rx sub-index
        l = np.array([[[0, 1], [2, 3]], [[4, 5], [6, 7]]])
        h = np.ones((2, 2, 2), dtype=complex)
        h[0, 0, 1] = 2.0    # strongest direct path of user 0 is path 1
        dch = DPathChannel(K=2, D=2, L=8, l=l, h=h)
        inst, mapping = expand_dpath(dch)
        assert inst.K == 4
        expected_l = np.array([
            [0, 1, 2, 3],
            [0, 1, 2, 3],
            [4, 5, 6, 7],
            [4, 5, 6, 7],
        ])
        assert np.array_equal(inst.l, expected_l)
        assert mapping.dstar == (1, 0)
        assert mapping.data_virtual == (1, 2)
        assert inst.h[1, 1] == 2.0    # data carrier of user 0 has the max gain

    def test_argmax_gain_selection(self):
        l = np.zeros((1, 1, 2), dtype=int)
        h = np.array([[[1.0, 3.0]]], dtype=complex)
        dch = DPathChannel(K=1, D=2, L=1, l=l, h=h)
        inst, mapping = expand_dpath(dch)
        assert mapping.dstar == (1,)
        assert inst.h[mapping.data_virtual[0], mapping.data_virtual[0]] == 3.0

    def test_pair_multiset_preserved(self):
        rng = np.random.default_rng(3)
        K, D = 2, 3
        l = rng.integers(0, 5, (K, K, D))
        h = np.exp(1j * rng.uniform(0, 2 * np.pi, (K, K, D)))
        dch = DPathChannel(K=K, D=D, L=5, l=l, h=h)
        inst, _ = expand_dpath(dch)
        assert inst.K == K * D
        src = sorted(
            (int(l[i, j, d]), complex(h[i, j, d]))
            for i in range(K) for j in range(K) for d in range(D)
        ) * D
        dst = sorted(
            (int(inst.l[a, b]), complex(inst.h[a, b]))
            for a in range(K * D) for b in range(K * D)
        )
        assert src == dst      # every physical path appears exactly D times

    def test_empty_paths_rejected(self):
        with pytest.raises(DomainError):
            DPathChannel(K=2, D=0, L=2, l=np.zeros((2, 2, 0), dtype=int),
                         h=np.zeros((2, 2, 0)))


class TestChannelJson:
    def test_roundtrip(self, tmp_path):
        ch = sample_channel(3, 6, rng=4, psd_over_n0=2.5)
        path = tmp_path / "ch.json"
        ch.to_json(str(path))
        back = ChannelInstance.from_json(str(path))
        assert back.K == ch.K and back.L == ch.L
        assert np.array_equal(back.l, ch.l)
        assert np.allclose(back.h, ch.h)
        assert back.psd_over_n0 == ch.psd_over_n0

    def test_schema_keys(self):
        ch = sample_channel(2, 3, rng=0)
        d = ch.to_json_dict()
        assert set(d) >= {"K", "L", "delays", "gains_re", "gains_im",
                          "psd_over_n0"}
        assert d["delays"][0][1] == int(ch.l[0, 1])    # indexed [rx][tx]

    def test_missing_field_rejected(self):
        with pytest.raises(DomainError):
            ChannelInstance.from_json_dict({"K": 2, "L": 3})


class TestValidation:
    def test_delay_range_enforced(self):
        with pytest.raises(DomainError):
            ChannelInstance(K=2, L=3, l=[[0, 3], [0, 0]], h=np.ones((2, 2)))

    def test_zero_gain_rejected(self):
        h = np.ones((2, 2), dtype=complex)
        h[0, 1] = 0
        with pytest.raises(DomainError):
            ChannelInstance(K=2, L=3, l=np.zeros((2, 2), dtype=int), h=h)

    def test_nonzero_normalized_diagonal_rejected(self):
        with pytest.raises(DomainError):
            NormalizedChannel.from_lp([[1, 0], [0, 0]])

    def test_sample_channel_delay_distribution(self):
        ch = sample_channel(4, 7, rng=9)
        assert ch.l.min() >= 0 and ch.l.max() <= 6
        assert np.allclose(np.abs(ch.h), 1.0)
