"""Hyperparameter validation, bit arithmetic, and config-file precedence."""

from pathlib import Path

import pytest

from clipq.config import (
    Hyperparams,
    RunConfig,
    config_from_sources,
    is_power_of_two,
    parse_config_file,
)


class TestDefaults:
    def test_default_code_length(self):
        hp = Hyperparams()
        hp.validate()
        assert (hp.m, hp.k) == (8, 256)
        assert hp.bits == 64

    def test_power_of_two_predicate(self):
        assert all(is_power_of_two(n) for n in (1, 2, 4, 256, 1 << 20))
        assert not any(is_power_of_two(n) for n in (0, -4, 3, 6, 255))


class TestValidation:
    @pytest.mark.parametrize("bad", [
        dict(alpha=0.0), dict(alpha=-1.0), dict(tau=0.0), dict(eta=-1),
        dict(k=100), dict(m=0), dict(batch_size=1), dict(max_epochs=-1),
        dict(lr_head=0.0), dict(lr_codebooks=-1e-3), dict(dim=10, m=4),
    ])
    def test_rejects_bad_values(self, bad):
        with pytest.raises(ValueError):
            Hyperparams(**bad).validate()

    def test_eta_must_leave_a_negative(self):
        # batch of 8 items gives 2*(8-1) = 14 negative scores per query
        Hyperparams(batch_size=8, eta=13).validate()
        with pytest.raises(ValueError, match="leaves no negatives"):
            Hyperparams(batch_size=8, eta=14).validate()

    def test_eta_zero_is_legal(self):
        Hyperparams(eta=0).validate()


class TestBits:
    @pytest.mark.parametrize("m,k,bits", [(8, 256, 64), (4, 256, 32),
                                          (2, 256, 16), (8, 16, 32), (1, 2, 1)])
    def test_bits_property(self, m, k, bits):
        assert Hyperparams(m=m, k=k).bits == bits

    def test_from_bits_inverts_bits(self):
        for bits in (16, 32, 64):
            hp = Hyperparams.from_bits(bits)
            assert hp.bits == bits and hp.k == 256

    def test_from_bits_smaller_vocab(self):
        hp = Hyperparams.from_bits(32, k=16)
        assert hp.m == 8

    def test_from_bits_rejects_fractional_m(self):
        with pytest.raises(ValueError, match="multiple"):
            Hyperparams.from_bits(20, k=256)
        with pytest.raises(ValueError):
            Hyperparams.from_bits(8, k=100)


class TestContentHash:
    def test_stable_and_sensitive(self):
        a = Hyperparams()
        assert a.content_hash() == Hyperparams().content_hash()
        assert len(a.content_hash()) == 32
        assert a.content_hash() != Hyperparams(eta=11).content_hash()
        assert a.content_hash() != Hyperparams(seed=1).content_hash()


class TestOverrides:
    def test_hyper_names_route_to_hyper(self):
        cfg = RunConfig().with_overrides(eta=3, tau=0.5, out="/tmp/x")
        assert cfg.hyper.eta == 3 and cfg.hyper.tau == 0.5
        assert cfg.out == Path("/tmp/x")

    def test_none_values_are_skipped(self):
        cfg = RunConfig().with_overrides(eta=None, manifest=None)
        assert cfg.hyper.eta == Hyperparams().eta
        assert cfg.manifest is None

    def test_bits_override_uses_current_k(self):
        cfg = RunConfig().with_overrides(k=16, bits=32)
        assert cfg.hyper.m == 8
        with pytest.raises(ValueError):
            RunConfig().with_overrides(bits=31)

    def test_path_keys_become_paths(self):
        cfg = RunConfig().with_overrides(snapshot="runs/a.snapshot",
                                         database="runs/a.codes")
        assert isinstance(cfg.snapshot, Path)
        assert isinstance(cfg.database, Path)


class TestConfigFile:
    def test_parse_types(self, tmp_path):
        p = tmp_path / "run.conf"
        p.write_text("""
# training run
eta = 4
tau = 0.15
use_bias = yes
out = runs/exp1
manifest = data/manifest.json
""")
        values = parse_config_file(p)
        assert values == {"eta": 4, "tau": 0.15, "use_bias": True,
                          "out": "runs/exp1", "manifest": "data/manifest.json"}

    def test_malformed_line(self, tmp_path):
        p = tmp_path / "bad.conf"
        p.write_text("eta 4\n")
        with pytest.raises(ValueError, match="bad.conf:1"):
            parse_config_file(p)

    def test_flags_beat_file(self, tmp_path):
        p = tmp_path / "run.conf"
        p.write_text("eta = 4\ntau = 0.15\n")
        cfg = config_from_sources(p, eta=9)
        assert cfg.hyper.eta == 9
        assert cfg.hyper.tau == 0.15

    def test_sources_are_validated(self, tmp_path):
        p = tmp_path / "run.conf"
        p.write_text("k = 100\n")
        with pytest.raises(ValueError):
            config_from_sources(p)
