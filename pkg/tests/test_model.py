"""Autoencoder architecture contracts and checkpoint round-trips."""

import numpy as np
import pytest

from thermocae.model import (
    Cae,
    CaeConfig,
    CheckpointIntegrityError,
    CheckpointVersionError,
    build_cae,
    load_checkpoint,
    save_checkpoint,
)
from thermocae.tensor import Tensor

# parameter count for the default config, frozen from the schedule:
# enc convs 320+18496+73856+295168+1180160, latent denses 524352+532480,
# dec convs 1179904+295040+73792+18464+289
DEFAULT_PARAM_COUNT = 4_192_321


class TestConfig:
    def test_default_bottleneck_is_4x4x512(self):
        cfg = CaeConfig()
        assert cfg.bottleneck_side == 4
        assert cfg.channels[-1] == 512
        assert cfg.flat_size == 8192

    def test_channel_schedule(self):
        assert CaeConfig(num_layers=2).channels == (32, 64)
        assert CaeConfig(num_layers=6).channels == (32, 64, 128, 256, 512, 512)

    def test_two_layer_bottleneck(self):
        cfg = CaeConfig(num_layers=2)
        assert cfg.bottleneck_side == 32
        assert cfg.channels == (32, 64)

    def test_invalid_configs_rejected(self):
        with pytest.raises(ValueError):
            CaeConfig(num_layers=7)
        with pytest.raises(ValueError):
            CaeConfig(latent_dim=4)
        with pytest.raises(ValueError):
            CaeConfig(num_layers=5, input_size=100)  # 100 not divisible by 32


class TestBuild:
    def test_deterministic_init(self):
        a = build_cae(CaeConfig(num_layers=2, input_size=32), seed=9)
        b = build_cae(CaeConfig(num_layers=2, input_size=32), seed=9)
        for name in a.params:
            assert np.array_equal(a.params[name].data, b.params[name].data)

    def test_different_seed_differs(self):
        a = build_cae(CaeConfig(num_layers=2, input_size=32), seed=1)
        b = build_cae(CaeConfig(num_layers=2, input_size=32), seed=2)
        assert not np.array_equal(a.params["enc0.w"].data, b.params["enc0.w"].data)

    def test_biases_zero(self):
        cae = build_cae(CaeConfig(num_layers=2, input_size=32), seed=3)
        for name, p in cae.params.items():
            if name.endswith(".b"):
                assert np.all(p.data == 0.0)

    def test_default_parameter_count(self):
        cae = build_cae(CaeConfig(), seed=0)
        assert cae.num_parameters() == DEFAULT_PARAM_COUNT


class TestForward:
    @pytest.mark.parametrize("batch", [1, 7])
    def test_output_shape_matches_input(self, batch):
        cae = build_cae(CaeConfig(num_layers=3, latent_dim=16, input_size=64), seed=4)
        x = Tensor(np.random.default_rng(0).uniform(0, 1, (batch, 1, 64, 64)))
        out = cae(x)
        assert out.shape == x.shape

    def test_untrained_output_in_open_unit_interval(self):
        cae = build_cae(CaeConfig(num_layers=2, latent_dim=8, input_size=32), seed=5)
        x = Tensor(np.random.default_rng(1).uniform(0, 1, (2, 1, 32, 32)))
        out = cae(x).data
        assert np.all(out > 0.0) and np.all(out < 1.0)

    def test_bottleneck_dimension(self):
        cfg = CaeConfig(num_layers=3, latent_dim=24, input_size=64)
        cae = build_cae(cfg, seed=6)
        x = Tensor(np.random.default_rng(2).uniform(0, 1, (5, 1, 64, 64)))
        z = cae.encode(x)
        assert z.shape == (5, 24)
        out = cae.decode(z)
        assert out.shape == x.shape
        # forward is exactly decode(encode(.))
        np.testing.assert_array_equal(cae(x).data, out.data)

    def test_encoder_feature_map_is_4x4x512_for_default(self):
        cfg = CaeConfig()
        # the flattened size implies the advertised 4x4x512 feature map
        assert (cfg.channels[-1], cfg.bottleneck_side, cfg.bottleneck_side) == (512, 4, 4)

    def test_wrong_input_size_rejected(self):
        cae = build_cae(CaeConfig(num_layers=2, input_size=32), seed=7)
        with pytest.raises(ValueError, match="expected input"):
            cae(Tensor(np.zeros((1, 1, 64, 64))))

    def test_forward_deterministic(self):
        cae = build_cae(CaeConfig(num_layers=2, input_size=32), seed=8)
        x = np.random.default_rng(3).uniform(0, 1, (2, 1, 32, 32))
        assert np.array_equal(cae(Tensor(x)).data, cae(Tensor(x.copy())).data)


class TestCheckpoint:
    @pytest.fixture
    def cae(self):
        return build_cae(CaeConfig(num_layers=2, latent_dim=8, input_size=32), seed=11)

    def test_round_trip_bit_exact(self, cae, tmp_path):
        path = tmp_path / "model.cae"
        save_checkpoint(cae, path)
        loaded = load_checkpoint(path)
        assert loaded.config == cae.config
        assert list(loaded.params) == list(cae.params)
        for name in cae.params:
            assert np.array_equal(loaded.params[name].data, cae.params[name].data)

    def test_save_load_save_idempotent(self, cae, tmp_path):
        p1, p2 = tmp_path / "a.cae", tmp_path / "b.cae"
        save_checkpoint(cae, p1)
        save_checkpoint(load_checkpoint(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_forward_identical_after_round_trip(self, cae, tmp_path):
        path = tmp_path / "model.cae"
        x = Tensor(np.random.default_rng(4).uniform(0, 1, (2, 1, 32, 32)))
        before = cae(x).data
        save_checkpoint(cae, path)
        after = load_checkpoint(path)(x).data
        assert np.array_equal(before, after)  # 0 ulps

    def test_corruption_detected(self, cae, tmp_path):
        path = tmp_path / "model.cae"
        save_checkpoint(cae, path)
        blob = bytearray(path.read_bytes())
        blob[100] ^= 0xFF  # flip one payload byte
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointIntegrityError, match="checksum"):
            load_checkpoint(path)

    def test_version_mismatch_detected(self, cae, tmp_path):
        import struct
        import zlib

        path = tmp_path / "model.cae"
        save_checkpoint(cae, path)
        blob = bytearray(path.read_bytes())
        payload = bytearray(blob[4:-4])
        payload[0:4] = struct.pack("<I", 99)  # bump the version field
        crc = struct.pack("<I", zlib.crc32(bytes(payload)) & 0xFFFFFFFF)
        path.write_bytes(bytes(blob[:4]) + bytes(payload) + crc)
        with pytest.raises(CheckpointVersionError, match="version"):
            load_checkpoint(path)

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "garbage.cae"
        path.write_bytes(b"definitely not a checkpoint")
        with pytest.raises(Exception, match="not an autoencoder checkpoint"):
            load_checkpoint(path)
