import numpy as np
import pytest
from scipy import signal

from srec import numkit as nk
from srec import sr
from srec.sr import RdnConfig, RdnModel


def conv_oracle(x, layer):
    """Same-padded cross-correlation through scipy, independent of the im2col path."""
    w, b = layer.weight.data, layer.bias.data
    out = np.zeros((w.shape[0],) + x.shape[1:])
    for o in range(w.shape[0]):
        for c in range(w.shape[1]):
            out[o] += signal.correlate2d(x[c], w[o, c], mode="same")
        out[o] += b[o]
    return out


def rdb_oracle(block, f_prev):
    feats = [f_prev]
    for layer in block.layers:
        feats.append(np.maximum(conv_oracle(np.concatenate(feats), layer), 0))
    return f_prev + conv_oracle(np.concatenate(feats), block.lff)


def smooth_pair(seed=0, size=16):
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:2 * size, 0:2 * size] / (2 * size)
    hi = np.stack([0.5 + 0.3 * np.sin(2 * np.pi * (rng.random() * 2 * xx + rng.random() * yy))
                   for _ in range(3)]).astype(np.float32)
    lo = hi.reshape(3, size, 2, size, 2).mean(axis=(2, 4))
    return lo, hi


class TestConfig:
    def test_defaults(self):
        c = RdnConfig()
        assert (c.D, c.C, c.G, c.G0, c.scale) == (3, 4, 16, 32, 2)

    @pytest.mark.parametrize("kw", [{"D": 0}, {"G": 0}, {"scale": 3}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            RdnConfig(**kw)

    @pytest.mark.parametrize("cfg", [RdnConfig(), RdnConfig(D=2, C=3, G=8, G0=12, scale=1)])
    def test_channel_bookkeeping(self, cfg):
        m = RdnModel(cfg)
        assert m.gff1.in_channels == cfg.D * cfg.G0
        for block in m.rdbs:
            for c, layer in enumerate(block.layers, start=1):
                assert layer.in_channels == cfg.G0 + (c - 1) * cfg.G
            assert block.lff.in_channels == cfg.G0 + cfg.C * cfg.G
            assert block.lff.out_channels == cfg.G0


class TestUnet:
    def test_shape_range_determinism(self):
        m = RdnModel(seed=0)
        x = nk.Tensor(np.random.default_rng(0).random((3, 64, 64)).astype(np.float32))
        w = sr.unet_attention(m, x)
        assert w.shape == (32, 64, 64)
        assert np.all((w.data > 0) & (w.data < 1))
        assert np.array_equal(w.data, sr.unet_attention(m, x).data)

    def test_indivisible(self):
        with pytest.raises(ValueError):
            sr.unet_attention(RdnModel(), nk.Tensor(np.zeros((3, 24, 24), np.float32)))


class TestRdb:
    def test_zero_lff_is_identity(self):
        m = RdnModel(seed=1)
        f = nk.Tensor(np.random.default_rng(0).standard_normal((32, 8, 8)).astype(np.float32))
        for block in m.rdbs:
            block.lff.weight.data[:] = 0
            block.lff.bias.data[:] = 0
            assert np.array_equal(sr.rdb_forward(block, f).data, f.data)

    def test_matches_unfused_oracle(self, f64):
        m = RdnModel(seed=2)
        m.astype(np.float64)
        rng = np.random.default_rng(1)
        for p in m.parameters():
            if p.ndim == 1:
                p.data[:] = rng.uniform(-0.1, 0.1, p.shape)
        f = rng.standard_normal((32, 8, 8))
        got = sr.rdb_forward(m.rdbs[0], nk.Tensor(f)).data
        np.testing.assert_allclose(got, rdb_oracle(m.rdbs[0], f), rtol=0, atol=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(ValueError):
            sr.rdb_forward(RdnModel().rdbs[0], nk.Tensor(np.zeros((16, 8, 8), np.float32)))

    def test_dense_connectivity_sensitivity(self):
        block = RdnModel(seed=3).rdbs[0]
        seen = {}

        class Recorder:
            def __init__(self, layer, idx, bump=0.0):
                self.layer, self.idx, self.bump = layer, idx, bump

            def __call__(self, x):
                seen.setdefault(self.idx, []).append(x.data.copy())
                out = self.layer(x)
                return nk.add(out, self.bump) if self.bump else out

        originals = list(block.layers)
        f = nk.Tensor(np.random.default_rng(0).standard_normal((32, 8, 8)).astype(np.float32))
        for bump in (0.0, 0.5):
            block.layers = [Recorder(layer, i, bump if i == 0 else 0.0) for i, layer in enumerate(originals)]
            block(f)
        block.layers = originals
        for i in range(1, len(originals)):
            base, perturbed = seen[i]
            assert not np.array_equal(base, perturbed), f"layer {i + 1} input unaffected"


class TestForward:
    def test_shape(self):
        m = RdnModel(seed=0)
        out = sr.rdn_forward(m, np.random.default_rng(0).random((3, 64, 64)).astype(np.float32))
        assert out.shape == (3, 128, 128)

    def test_scale_one(self):
        m = RdnModel(RdnConfig(scale=1), seed=0)
        assert sr.rdn_forward(m, np.zeros((3, 16, 16), np.float32)).shape == (3, 16, 16)

    def test_batched(self):
        m = RdnModel(seed=0)
        x = np.random.default_rng(0).random((2, 3, 16, 16)).astype(np.float32)
        out = sr.rdn_forward(m, x).data
        np.testing.assert_allclose(out[1], sr.rdn_forward(m, x[1]).data, atol=1e-6)

    def test_global_residual_identity(self):
        m = RdnModel(seed=4, means=(0.4, 0.5, 0.6))
        m.unet.head.weight.data[:] = 0
        m.unet.head.bias.data[:] = -1000.0  # sigmoid underflows to exactly 0
        m.final.weight.data[:] = 0
        m.final.weight.data[[0, 1, 2], [0, 1, 2], 1, 1] = 1
        m.final.bias.data[:] = 0
        x = nk.Tensor(np.random.default_rng(0).random((3, 16, 16)).astype(np.float32))
        f1 = nk.pixel_shuffle(m.up1(m.sub_mean(x)), 2)
        assert np.array_equal(sr.rdn_forward(m, x).data, m.add_mean(f1).data)

    def test_mean_shift_inversion(self):
        m = RdnModel(means=(0.41, 0.52, 0.63))
        x = nk.Tensor(np.random.default_rng(0).random((3, 16, 16)).astype(np.float32))
        back = m.add_mean(m.sub_mean(x)).data
        assert np.all(np.abs(back - x.data) <= np.spacing(np.abs(x.data) + 1))

    def test_stage_annotated_errors(self):
        m = RdnModel()
        with pytest.raises(sr.StageError, match="^input:"):
            sr.rdn_forward(m, np.zeros((4, 16, 16), np.float32))
        with pytest.raises(sr.StageError, match="^input:"):
            sr.rdn_forward(m, np.zeros((3, 20, 16), np.float32))

    def test_deterministic(self):
        m = RdnModel(seed=0)
        x = np.random.default_rng(0).random((3, 16, 16)).astype(np.float32)
        assert np.array_equal(sr.rdn_forward(m, x).data, sr.rdn_forward(m, x).data)

    def test_grad_check_16x16(self, f64):
        m = RdnModel(seed=0)
        m.astype(np.float64)
        x = nk.Tensor(np.random.default_rng(0).random((3, 16, 16)))
        rep = nk.grad_check(lambda: sr.rdn_forward(m, x), [x] + m.parameters(), tolerance=1e-3,
                            max_elements=3)
        assert rep.passed, rep
        assert rep.skipped < 0.2 * rep.checked


class TestTraining:
    def test_zero_learning_rate(self):
        m = RdnModel(seed=0)
        before = m.state_dict()
        sr.train_sr(m, [smooth_pair(0)], nk.TrainConfig(learning_rate=0.0, batch_size=1, max_steps=3))
        after = m.state_dict()
        assert all(np.array_equal(before[k], after[k]) for k in before)

    def test_empty(self):
        with pytest.raises(ValueError):
            sr.train_sr(RdnModel(), [], nk.TrainConfig(max_steps=1))

    def test_target_size_checked(self):
        lo, hi = smooth_pair()
        with pytest.raises(ValueError):
            sr.train_sr(RdnModel(), [(lo, lo)], nk.TrainConfig(max_steps=1))

    def test_means_from_targets(self):
        m = RdnModel()
        pair = smooth_pair(1)
        sr.train_sr(m, [pair], nk.TrainConfig(learning_rate=0.0, max_steps=1))
        np.testing.assert_allclose(m.means, pair[1].mean(axis=(1, 2)), rtol=1e-6)

    def test_deterministic_history(self):
        cfg = nk.TrainConfig(learning_rate=1e-3, batch_size=2, max_steps=10, seed=1)
        pairs = [smooth_pair(i) for i in range(3)]
        runs = [sr.train_sr(RdnModel(seed=0), pairs, cfg).losses for _ in range(2)]
        assert runs[0] == runs[1]

    def test_heldout_improves(self):
        pairs = [smooth_pair(i) for i in range(4)]
        res = sr.train_sr(RdnModel(seed=0), pairs, nk.TrainConfig(learning_rate=1e-3, batch_size=4, max_steps=30),
                          holdout=[smooth_pair(9)])
        assert res.final_eval < res.initial_eval

    @pytest.mark.slow
    def test_single_pair_overfit(self):
        res = sr.train_sr(RdnModel(seed=0), [smooth_pair(0)],
                          nk.TrainConfig(learning_rate=1e-3, batch_size=1, max_steps=2000))
        assert res.losses[0] / min(res.losses[-10:]) >= 10


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        m = RdnModel(RdnConfig(D=2, C=3, G=8, G0=16, scale=1), means=(0.1, 0.2, 0.3), seed=7)
        sr.save_sr(m, tmp_path / "sr.bin")
        m2 = sr.load_sr(tmp_path / "sr.bin")
        assert m2.config == m.config
        np.testing.assert_allclose(m2.means, m.means)
        x = np.random.default_rng(0).random((3, 16, 16)).astype(np.float32)
        assert np.array_equal(sr.enhance(m, x), sr.enhance(m2, x))
