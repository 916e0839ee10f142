import numpy as np
import pytest

from perigen import objective as O
from perigen import tensor as T
from perigen.objective import LossWeights, contrastive_loss, kl_loss, recon_loss, total_loss
from perigen.pgraph import Decomposition
from perigen.tensor import Tensor, grad_check


def contrastive_oracle(zs, labels, tau, beta):
    """Direct evaluation of the printed objective: for every ordered
    within-label pair (j, k), including j = k, accumulate
    log(exp(sim_jk / tau) / sum over other-label latents of exp(sim / tau))."""
    def cos(a, b):
        return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))

    total = 0.0
    for label in set(labels):
        members = [z for z, l in zip(zs, labels) if l == label]
        others = [z for z, l in zip(zs, labels) if l != label]
        for zj in members:
            denom = sum(np.exp(cos(zj, zt) / tau) for zt in others)
            for zk in members:
                total += np.log(np.exp(cos(zj, zk) / tau) / denom)
    return -beta * total


class TestReconLoss:
    def _uniform_probs(self, value, n_max=3, m_max=2):
        hollow_n = 1.0 - np.eye(n_max)
        hollow_m = 1.0 - np.eye(m_max)
        return (
            Tensor(value * hollow_n),
            Tensor(np.full((n_max, n_max), value)),
            Tensor(value * hollow_m),
        )

    def _target(self, n=3, m=2):
        unit = np.ones((n, n), dtype=np.int64) - np.eye(n, dtype=np.int64)
        bonds = np.zeros((n, n), dtype=np.int64)
        bonds[0, 0] = 1
        return Decomposition(unit=unit, layout=[[0, 1], [1, 0]], bonds=bonds)

    def test_perfect_prediction_near_zero(self):
        target = self._target()
        probs = (
            Tensor(target.unit.astype(float)),
            Tensor(target.bonds.astype(float)),
            Tensor(target.layout.astype(float)),
        )
        assert float(recon_loss(probs, target).data) < 2e-6

    def test_uninformative_prediction_is_ln2(self):
        # diagonals are forced to 0 in both probs and targets, so every
        # entry contributes exactly ln 2 except unit/layout diagonals
        target = Decomposition(
            unit=np.zeros((3, 3), dtype=np.int64),
            layout=np.zeros((2, 2), dtype=np.int64),
            bonds=np.zeros((3, 3), dtype=np.int64),
        )
        probs = (
            Tensor(np.full((3, 3), 0.5)),
            Tensor(np.full((3, 3), 0.5)),
            Tensor(np.full((2, 2), 0.5)),
        )
        assert float(recon_loss(probs, target).data) == pytest.approx(np.log(2))

    def test_inverted_prediction_hits_clamp(self):
        target = self._target()
        probs = (
            Tensor(1.0 - target.unit.astype(float)),
            Tensor(1.0 - target.bonds.astype(float)),
            Tensor(1.0 - target.layout.astype(float)),
        )
        per_entry = float(recon_loss(probs, target).data)
        assert per_entry == pytest.approx(-np.log(1e-7), rel=1e-6)

    def test_non_binary_target_rejected(self):
        probs = self._uniform_probs(0.5)
        bad = (np.full((3, 3), 0.5), np.zeros((2, 2)), np.zeros((3, 3)))
        with pytest.raises(ValueError, match="binary"):
            recon_loss(probs, bad)

    def test_minimized_at_target(self):
        target = self._target()
        base = (
            Tensor(np.clip(target.unit.astype(float), 1e-7, 1 - 1e-7)),
            Tensor(np.clip(target.bonds.astype(float), 1e-7, 1 - 1e-7)),
            Tensor(np.clip(target.layout.astype(float), 1e-7, 1 - 1e-7)),
        )
        best = float(recon_loss(base, target).data)
        rng = np.random.default_rng(0)
        for _ in range(20):
            noisy = tuple(
                Tensor(np.clip(b.data + rng.uniform(0, 0.3, b.data.shape), 1e-7, 1 - 1e-7))
                for b in base
            )
            assert float(recon_loss(noisy, target).data) > best


class TestKlLoss:
    def test_matching_prior_is_zero(self):
        zero = Tensor(np.zeros((1, 3)))
        assert float(kl_loss(zero, zero, zero, zero, 1.0, 1.0).data) == 0.0

    def test_closed_form_example(self):
        mu = Tensor(np.array([[1.0, 0.0]]))
        logsig = Tensor(np.zeros((1, 2)))
        zero = Tensor(np.zeros((1, 2)))
        out = kl_loss(mu, logsig, zero, zero, 1.0, 1.0)
        assert float(out.data) == pytest.approx(0.5)

    def test_nonnegative_sweep(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            mu = Tensor(rng.standard_normal((1, 4)))
            logsig = Tensor(rng.standard_normal((1, 4)))
            val = float(kl_loss(mu, logsig, mu, logsig, 1.0, 1.0).data)
            assert val >= 0.0

    def test_weights_scale_terms(self):
        mu = Tensor(np.array([[1.0]]))
        zero = Tensor(np.zeros((1, 1)))
        local_only = kl_loss(mu, zero, zero, zero, 2.0, 0.0)
        assert float(local_only.data) == pytest.approx(1.0)


class TestContrastive:
    def test_hand_example_matches_oracle(self):
        zs = [np.array([1.0, 0.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        labels = ["a", "a", "b"]
        expected = contrastive_oracle(zs, labels, tau=1.0, beta=1.0)
        # closed form: label a contributes -4, label b -(1 - ln 2)
        assert expected == pytest.approx(-(5.0 - np.log(2)))
        got = contrastive_loss([Tensor(z.reshape(1, 2)) for z in zs], labels, 1.0, 1.0)
        assert float(got.data) == pytest.approx(expected, rel=1e-12)

    def test_identical_latents_positive_loss(self):
        z = np.array([0.3, 0.4])
        labels = ["a", "a", "b", "b", "c"]
        zs = [z] * 5
        counts = {"a": 2, "b": 2, "c": 1}
        expected = 1.0 * sum(c * c * np.log(5 - c) for c in counts.values())
        got = contrastive_loss([Tensor(z.reshape(1, 2))] * 5, labels, 1.0, 1.0)
        assert float(got.data) == pytest.approx(expected, rel=1e-12)
        assert float(got.data) > 0

    def test_matches_oracle_random(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            b = int(rng.integers(2, 8))
            labels = [str(rng.integers(0, 3)) for _ in range(b)]
            if len(set(labels)) < 2:
                labels[0], labels[1] = "x", "y"
            zs = [rng.standard_normal(4) for _ in range(b)]
            tau = float(rng.uniform(0.1, 1.5))
            beta = float(rng.uniform(0.1, 2.0))
            expected = contrastive_oracle(zs, labels, tau, beta)
            got = contrastive_loss([Tensor(z.reshape(1, -1)) for z in zs], labels, tau, beta)
            assert float(got.data) == pytest.approx(expected, rel=1e-9)

    def test_zero_weight_returns_zero(self):
        zs = [Tensor(np.ones((1, 2))), Tensor(np.ones((1, 2)))]
        assert float(contrastive_loss(zs, ["a", "b"], 0.2, 0.0).data) == 0.0

    def test_single_label_counts_warning(self):
        before = O.single_label_batches
        out = contrastive_loss([Tensor(np.ones((1, 2)))] * 3, ["a", "a", "a"], 0.2, 1.0)
        assert float(out.data) == 0.0
        assert O.single_label_batches == before + 1

    def test_tighter_within_label_lowers_loss(self):
        # cross-label geometry held fixed while within-label pairs align
        labels = ["a", "a", "b", "b"]
        spread = [
            np.array([1.0, 0.2]), np.array([1.0, -0.2]),
            np.array([-1.0, 0.2]), np.array([-1.0, -0.2]),
        ]
        tight = [
            np.array([1.0, 0.05]), np.array([1.0, -0.05]),
            np.array([-1.0, 0.05]), np.array([-1.0, -0.05]),
        ]
        loose_val = contrastive_oracle(spread, labels, 0.5, 1.0)
        tight_val = contrastive_oracle(tight, labels, 0.5, 1.0)
        assert tight_val < loose_val
        got_loose = float(contrastive_loss([Tensor(z.reshape(1, 2)) for z in spread], labels, 0.5, 1.0).data)
        got_tight = float(contrastive_loss([Tensor(z.reshape(1, 2)) for z in tight], labels, 0.5, 1.0).data)
        assert got_tight < got_loose


class TestTotalLoss:
    def test_single_graph_batch_drops_contrastive(self):
        weights = LossWeights()
        before = O.single_label_batches
        rec = Tensor(np.array(0.7))
        kl = Tensor(np.array(0.2))
        z = Tensor(np.ones((1, 3)))
        total, breakdown = total_loss([rec], [kl], [z], ["a"], weights)
        assert breakdown.l_contra == 0.0
        assert breakdown.total == pytest.approx(0.9)
        assert O.single_label_batches == before + 1

    def test_zero_weights_leave_reconstruction(self):
        weights = LossWeights(beta_local=0.0, beta_global=0.0, beta_contrast=0.0)
        rec = [Tensor(np.array(0.4)), Tensor(np.array(0.6))]
        kl = [
            kl_loss(Tensor(np.ones((1, 2))), Tensor(np.zeros((1, 2))),
                    Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 2))), 0.0, 0.0)
            for _ in range(2)
        ]
        zs = [Tensor(np.ones((1, 2))), Tensor(np.ones((1, 2)))]
        total, breakdown = total_loss(rec, kl, zs, ["a", "b"], weights)
        assert breakdown.l_kl == 0.0
        assert breakdown.total == pytest.approx(breakdown.l_rec) == pytest.approx(0.5)

    def test_breakdown_sums_to_total(self):
        rng = np.random.default_rng(3)
        weights = LossWeights()
        rec = [Tensor(np.array(float(rng.uniform(0, 1)))) for _ in range(3)]
        kl = [Tensor(np.array(float(rng.uniform(0, 1)))) for _ in range(3)]
        zs = [Tensor(rng.standard_normal((1, 4))) for _ in range(3)]
        total, b = total_loss(rec, kl, zs, ["a", "b", "a"], weights)
        assert b.total == pytest.approx(b.l_rec + b.l_kl + b.l_contra)
        assert float(total.data) == pytest.approx(b.total)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            total_loss([], [], [], [], LossWeights())

    def test_gradient_through_all_terms(self):
        rng = np.random.default_rng(4)
        weights = LossWeights(temperature=0.7)
        leaves = {
            "mu1": T.parameter(rng.standard_normal((1, 3))),
            "mu2": T.parameter(rng.standard_normal((1, 3))),
            "p": T.parameter(rng.standard_normal((2, 2))),
            "q": T.parameter(rng.standard_normal((1, 1))),
        }
        target = Decomposition(unit=[[0, 1], [1, 0]], layout=[[0]], bonds=np.zeros((2, 2), dtype=np.int64))

        def f(ps):
            zero = T.Tensor(np.zeros((1, 3)))
            rec = recon_loss((T.sigmoid(ps["p"]), T.sigmoid(ps["p"]), T.sigmoid(ps["q"])), target)
            kls = kl_loss(ps["mu1"], zero, ps["mu2"], zero, 0.3, 0.3)
            total, _ = total_loss([rec], [kls], [ps["mu1"], ps["mu2"]], ["a", "b"], weights)
            return total

        assert grad_check(f, leaves) < 1e-6
