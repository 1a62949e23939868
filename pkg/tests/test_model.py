"""
Test suite for the shared-weight encoder, head transfer and checkpoints.
"""

import copy

import pytest
import torch
import torch.nn.functional as F

from ssl_curriculum.model import (
    EncoderSpec,
    HeadSpec,
    SharedEncoderClassifier,
    build_model,
    forward_pretext,
    load_checkpoint,
    save_checkpoint,
    transfer_encoder,
)
from ssl_curriculum.transforms import Patch
from ssl_curriculum.utils import CheckpointMismatchError


class TestSpecs:
    """Test encoder and head spec validation."""

    def test_encoder_spec_rejects_bad_channels(self):
        with pytest.raises(ValueError, match="channels"):
            EncoderSpec(channels=2)

    def test_encoder_spec_rejects_empty_stages(self):
        with pytest.raises(ValueError, match="at least one"):
            EncoderSpec(stages=())

    def test_head_spec_needs_two_classes(self):
        with pytest.raises(ValueError):
            HeadSpec(in_dim=8, out_classes=1)

    def test_fingerprint_tracks_spec(self, tiny_spec):
        assert tiny_spec.fingerprint() == EncoderSpec(**tiny_spec.to_dict()).fingerprint()
        assert tiny_spec.fingerprint() != EncoderSpec(
            input_size=16, channels=3, stages=tiny_spec.stages, embedding_dim=32
        ).fingerprint()


class TestSharedEncoderClassifier:
    """Test the forward pass and weight sharing."""

    def test_output_shape(self, tiny_spec):
        model = build_model(tiny_spec, n_inputs=4, out_classes=6, seed=0)
        logits = model(torch.zeros(5, 4, 3, 16, 16))
        assert tuple(logits.shape) == (5, 6)
        assert model.head_spec.in_dim == 4 * tiny_spec.embedding_dim

    def test_rejects_wrong_input_shape(self, tiny_spec):
        model = build_model(tiny_spec, n_inputs=2, out_classes=8, seed=0)
        with pytest.raises(ValueError, match="Expected input of shape"):
            model(torch.zeros(5, 3, 3, 16, 16))

    def test_gradient_equals_sum_over_cloned_encoders(self, tiny_spec):
        """The shared encoder's gradient equals the sum of the gradients of k independent copies."""
        k = 3
        model = build_model(tiny_spec, n_inputs=k, out_classes=4, seed=1).double()
        generator = torch.Generator().manual_seed(0)
        x = torch.randn(6, k, 3, 16, 16, generator=generator, dtype=torch.float64)
        y = torch.tensor([0, 1, 2, 3, 0, 1])

        F.cross_entropy(model(x), y).backward()
        shared = {name: p.grad.clone() for name, p in model.encoder.named_parameters()}

        clones = [copy.deepcopy(model.encoder) for _ in range(k)]
        head = copy.deepcopy(model.head)
        for module in clones + [head]:
            module.zero_grad()
        embeddings = torch.cat([clones[i](x[:, i]) for i in range(k)], dim=1)
        F.cross_entropy(head(embeddings), y).backward()

        for name, param in model.encoder.named_parameters():
            summed = sum(dict(clone.named_parameters())[name].grad for clone in clones)
            torch.testing.assert_close(shared[name], summed, rtol=1e-9, atol=1e-12)

    def test_build_model_is_seeded_and_isolated(self, tiny_spec):
        """Same seed gives the same parameters and the global RNG is left untouched."""
        torch.manual_seed(123)
        expected = torch.rand(3)
        torch.manual_seed(123)
        a = build_model(tiny_spec, 1, 4, seed=7)
        after = torch.rand(3)
        b = build_model(tiny_spec, 1, 4, seed=7)
        c = build_model(tiny_spec, 1, 4, seed=8)

        assert torch.equal(expected, after)
        for (_, pa), (_, pb) in zip(a.state_dict().items(), b.state_dict().items()):
            assert torch.equal(pa, pb)
        assert not torch.equal(a.head.weight, c.head.weight)

    def test_forward_pretext(self, tiny_spec):
        model = build_model(tiny_spec, n_inputs=2, out_classes=8, seed=0)
        patches = [Patch(torch.rand(16, 16, 3).numpy()) for _ in range(2)]
        assert tuple(forward_pretext(model, patches).shape) == (8,)
        with pytest.raises(ValueError, match="consumes 2 patches"):
            forward_pretext(model, patches[:1])


class TestTransferEncoder:
    """Test moving a pretrained encoder under a new head."""

    def test_parameters_copied_bit_identical(self, tiny_spec):
        pretext = build_model(tiny_spec, n_inputs=4, out_classes=6, seed=0)
        downstream = transfer_encoder(pretext, n_classes=10, seed=3)

        assert downstream.n_inputs == 1
        assert downstream.out_classes == 10
        assert downstream.head.weight.shape == (10, tiny_spec.embedding_dim)
        for (name, a), (_, b) in zip(pretext.encoder.state_dict().items(), downstream.encoder.state_dict().items()):
            assert torch.equal(a, b), name

    def test_copy_is_independent(self, tiny_spec):
        """Training the transferred encoder leaves the pretext model unchanged."""
        pretext = build_model(tiny_spec, n_inputs=4, out_classes=6, seed=0)
        before = copy.deepcopy(pretext.state_dict())
        downstream = transfer_encoder(pretext, n_classes=4, seed=0)
        with torch.no_grad():
            for p in downstream.encoder.parameters():
                p.add_(1.0)
        for name, value in pretext.state_dict().items():
            assert torch.equal(value, before[name])

    def test_freeze_encoder(self, tiny_spec):
        pretext = build_model(tiny_spec, n_inputs=2, out_classes=8, seed=0)
        probe = transfer_encoder(pretext, n_classes=4, seed=0, freeze_encoder=True)
        assert not any(p.requires_grad for p in probe.encoder.parameters())
        assert all(p.requires_grad for p in probe.head.parameters())

    def test_head_seeded(self, tiny_spec):
        pretext = build_model(tiny_spec, n_inputs=2, out_classes=8, seed=0)
        assert torch.equal(transfer_encoder(pretext, 4, seed=5).head.weight, transfer_encoder(pretext, 4, seed=5).head.weight)

    def test_rejects_single_class(self, tiny_spec):
        with pytest.raises(ValueError):
            transfer_encoder(build_model(tiny_spec, 1, 4, seed=0), n_classes=1, seed=0)


class TestCheckpoint:
    """Test checkpoint persistence and fingerprint checks."""

    def test_save_and_load(self, tmp_path, tiny_spec):
        model = build_model(tiny_spec, n_inputs=4, out_classes=6, seed=2)
        path = save_checkpoint(model, tmp_path / "run" / "checkpoint.bin", extra={"run_id": "abc", "seed": 2})

        loaded, extra = load_checkpoint(path, expected_encoder=tiny_spec)

        assert isinstance(loaded, SharedEncoderClassifier)
        assert extra == {"run_id": "abc", "seed": 2}
        assert loaded.n_inputs == 4 and loaded.out_classes == 6
        for name, value in model.state_dict().items():
            assert torch.equal(value, loaded.state_dict()[name])

    def test_encoder_mismatch(self, tmp_path, tiny_spec):
        path = save_checkpoint(build_model(tiny_spec, 1, 4, seed=0), tmp_path / "checkpoint.bin")
        other = EncoderSpec(input_size=16, channels=3, stages=tiny_spec.stages, embedding_dim=24)
        with pytest.raises(CheckpointMismatchError, match="does not match the configured encoder"):
            load_checkpoint(path, expected_encoder=other)

    def test_tampered_fingerprint(self, tmp_path, tiny_spec):
        path = save_checkpoint(build_model(tiny_spec, 1, 4, seed=0), tmp_path / "checkpoint.bin")
        payload = torch.load(path, weights_only=True)
        payload["fingerprints"]["encoder"] = "0" * 16
        torch.save(payload, path)
        with pytest.raises(CheckpointMismatchError, match="stored spec"):
            load_checkpoint(path)

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "other.bin"
        torch.save({"weights": torch.zeros(2)}, path)
        with pytest.raises(CheckpointMismatchError, match="is not an"):
            load_checkpoint(path)
