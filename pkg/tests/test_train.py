import numpy as np
import pytest

from perigen.datagen import DatasetManifest, generate_dataset
from perigen.model import ModelConfig, init_params
from perigen.objective import LossWeights
from perigen.train import (
    Adam,
    NonFiniteLossError,
    TrainConfig,
    _batch_plan,
    load_checkpoint,
    resume,
    train,
)

TINY_MODEL = ModelConfig(gin_layers=1, clusters=2, local_dim=3, global_dim=3, hidden=4, n_max=6, m_max=4)


def tiny_config(**overrides) -> TrainConfig:
    base = dict(epochs=2, batch_size=4, seed=5, checkpoint_every=1, model=TINY_MODEL)
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="module")
def records():
    manifest = DatasetManifest(counts={"triangle": 4, "grid": 4, "hexagon": 4}, m_max=3, seed=2)
    return generate_dataset(manifest)


class TestAdam:
    def test_zero_learning_rate_is_identity(self):
        params = init_params(TINY_MODEL, seed=0)
        before = {k: p.data.copy() for k, p in params.items()}
        opt = Adam(params, lr=0.0, beta1=0.9, beta2=0.999, eps=1e-8)
        for p in params.values():
            p.grad = np.ones_like(p.data)
        for _ in range(5):
            opt.step()
        for k, p in params.items():
            assert np.array_equal(p.data, before[k])

    def test_step_moves_against_gradient(self):
        params = {"w": init_params(TINY_MODEL, seed=1)["gin0.w1"]}
        opt = Adam(params, lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
        before = params["w"].data.copy()
        params["w"].grad = np.ones_like(before)
        opt.step()
        assert (params["w"].data < before).all()


class TestTrainLoop:
    def test_determinism(self, records):
        cfg = tiny_config()
        params_a, rows_a = train(cfg, records)
        params_b, rows_b = train(cfg, records)
        for k in params_a:
            assert np.array_equal(params_a[k].data, params_b[k].data)
        assert [r["l_rec"] for r in rows_a] == [r["l_rec"] for r in rows_b]

    def test_loss_decreases_over_short_run(self, records):
        cfg = tiny_config(epochs=15)
        _, rows = train(cfg, records)
        assert rows[-1]["l_rec"] < rows[0]["l_rec"]

    def test_log_columns(self, records, tmp_path):
        cfg = tiny_config()
        _, rows = train(cfg, records, out_dir=tmp_path)
        header = (tmp_path / "train_log.csv").read_text().splitlines()[0]
        assert header == "epoch,l_rec,l_kl,l_contra,total,seconds"
        assert len(rows) == cfg.epochs

    def test_checkpoint_roundtrip_bit_identical(self, records, tmp_path):
        cfg = tiny_config(epochs=1)
        params, _ = train(cfg, records, out_dir=tmp_path)
        loaded_cfg, loaded, moments, epoch, step = load_checkpoint(tmp_path / "ckpt_final.npz")
        assert epoch == 1
        assert loaded_cfg.to_dict() == cfg.to_dict()
        for k in params:
            assert np.array_equal(loaded[k].data, params[k].data)

    def test_resume_equals_uninterrupted(self, records, tmp_path):
        full_cfg = tiny_config(epochs=4)
        params_full, rows_full = train(full_cfg, records)

        half_cfg = tiny_config(epochs=2)
        train(half_cfg, records, out_dir=tmp_path)
        params_res, rows_res = resume(tmp_path / "ckpt_final.npz", full_cfg, records)
        for k in params_full:
            assert np.array_equal(params_full[k].data, params_res[k].data)
        assert [r["l_rec"] for r in rows_full[2:]] == [r["l_rec"] for r in rows_res]

    def test_resume_zero_extra_epochs_identical(self, records, tmp_path):
        cfg = tiny_config(epochs=2)
        params, _ = train(cfg, records, out_dir=tmp_path)
        params_res, rows = resume(tmp_path / "ckpt_final.npz", cfg, records)
        assert rows == []
        for k in params:
            assert np.array_equal(params_res[k].data, params[k].data)

    def test_resume_rejects_changed_dims(self, records, tmp_path):
        cfg = tiny_config(epochs=1)
        train(cfg, records, out_dir=tmp_path)
        other_model = ModelConfig(gin_layers=1, clusters=2, local_dim=5, global_dim=3, hidden=4, n_max=6, m_max=4)
        other = tiny_config(epochs=2, model=other_model)
        with pytest.raises(ValueError, match="local_dim"):
            resume(tmp_path / "ckpt_final.npz", other, records)

    def test_nonfinite_loss_aborts_with_term_name(self, records):
        cfg = tiny_config()
        params = init_params(cfg.model, seed=cfg.seed)
        params["gin0.w1"].data[0, 0] = np.nan
        opt = Adam(params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        with pytest.raises(NonFiniteLossError, match="l_rec"):
            train(cfg, records, _state=(params, {"m": opt.m, "v": opt.v}, 0, 0))

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            train(tiny_config(), [])


class TestBatching:
    def test_stratified_batches_are_mixed(self):
        labels = ["a"] * 40 + ["b"] * 7 + ["c"] * 5
        rng = np.random.default_rng(0)
        for trial in range(20):
            batches = _batch_plan(labels, 8, True, np.random.default_rng(trial))
            assert all(len({labels[i] for i in batch}) >= 2 for batch in batches)

    def test_drop_last_partial_batch(self):
        labels = ["a"] * 5 + ["b"] * 5
        batches = _batch_plan(labels, 4, True, np.random.default_rng(1))
        assert len(batches) == 2
        assert all(len(b) == 4 for b in batches)

    def test_small_dataset_single_batch(self):
        labels = ["a", "b", "a"]
        batches = _batch_plan(labels, 8, True, np.random.default_rng(2))
        assert len(batches) == 1 and len(batches[0]) == 3

    def test_batches_partition_indices(self):
        labels = ["a"] * 16 + ["b"] * 16
        batches = _batch_plan(labels, 8, True, np.random.default_rng(3))
        seen = sorted(i for b in batches for i in b)
        assert len(seen) == len(set(seen)) == 32


class TestConfig:
    def test_rejects_stratified_batch_of_one(self):
        with pytest.raises(ValueError, match="batch_size"):
            TrainConfig(batch_size=1)

    def test_rejects_nonpositive_rate(self):
        with pytest.raises(ValueError, match="learning_rate"):
            TrainConfig(learning_rate=0.0)

    def test_dict_roundtrip(self):
        cfg = tiny_config(loss=LossWeights(beta_contrast=0.5))
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg
