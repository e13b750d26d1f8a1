from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

pairtune = pytest.importorskip("pairtune")

from toy_corpus import PRETRAIN_CODES, toy_export, toy_vocabulary  # noqa: E402


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A small checkpoint pretrained on the toy pair task.

    The model is built locally (tiny bilingual vocabulary, random init) and
    then pretrained on pair data drawn from a code set disjoint from the one
    the tests fine-tune on, so fine-tuning starts from useful weights but
    still has something to learn.
    """
    torch = pytest.importorskip("torch")
    transformers = pytest.importorskip("transformers")
    from pairtune.protocol import FineTuneProtocol
    from pairtune.torch_backend import TorchPairTrainer

    path = tmp_path_factory.mktemp("tiny_model")
    vocabulary = toy_vocabulary()
    (path / "vocab.txt").write_text("\n".join(vocabulary) + "\n")
    tokenizer = transformers.BertTokenizer(str(path / "vocab.txt"),
                                           do_lower_case=True)
    tokenizer.save_pretrained(path)
    config = transformers.BertConfig(
        vocab_size=len(vocabulary),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=32,
        num_labels=2,
    )
    torch.manual_seed(0)
    transformers.BertForSequenceClassification(config).save_pretrained(path)

    pretrain = (toy_export(300, "de", 0.5, 1, "pd", PRETRAIN_CODES)
                + toy_export(300, "en", 0.5, 2, "pe", PRETRAIN_CODES))
    validation = toy_export(60, "de", 0.5, 3, "pv", PRETRAIN_CODES)
    protocol = FineTuneProtocol(model_id=str(path), lr_candidates=[1e-4],
                                run_seeds=[1], max_length=16)
    trainer = TorchPairTrainer(str(path), pretrain, validation, [], 1e-4, 1,
                               protocol)
    # pretraining is outside the fine-tuning protocol; a higher rate is fine here
    trainer.optimizer = torch.optim.AdamW(trainer.model.parameters(), lr=1e-3,
                                          weight_decay=0.01)
    for _ in range(60):
        trainer.train_epoch()
        if trainer.validation_f1() >= 0.97:
            break
    trainer.model.save_pretrained(path)
    return path
