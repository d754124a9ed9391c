import random

import pytest
import torch

PER_CHARS = ["甲", "乙", "丙", "丁"]
LOC_CHARS = ["沪", "京", "穗"]
NUM_CHARS = ["一", "二", "三", "四"]
FILLER = ["的", "了", "在"]
MARKERS = ["呼", "君", "去", "共"]


def toy_sentences(rng, count):
    """Rigidly patterned sentences a tiny model can memorize.

    PER: 2 chars between 呼 and 君; LOC: 1 char after 去; NUM: 2 chars
    after 共.  Returns (tokens, spans) pairs.
    """
    sentences = []
    for _ in range(count):
        tokens, spans = [], []
        tokens.append(rng.choice(FILLER))
        kinds = rng.sample(["PER", "LOC", "NUM"], k=rng.randint(1, 3))
        for kind in kinds:
            if kind == "PER":
                tokens.append("呼")
                start = len(tokens)
                tokens.extend(rng.sample(PER_CHARS, 2))
                spans.append((start, start + 2, "PER"))
                tokens.append("君")
            elif kind == "LOC":
                tokens.append("去")
                start = len(tokens)
                tokens.append(rng.choice(LOC_CHARS))
                spans.append((start, start + 1, "LOC"))
            else:
                tokens.append("共")
                start = len(tokens)
                tokens.extend(rng.sample(NUM_CHARS, 2))
                spans.append((start, start + 2, "NUM"))
            tokens.append(rng.choice(FILLER))
        sentences.append((tokens, spans))
    return sentences


def to_bio(sentences) -> str:
    blocks = []
    for tokens, spans in sentences:
        tags = ["O"] * len(tokens)
        for start, end, label in spans:
            tags[start] = f"B-{label}"
            for i in range(start + 1, end):
                tags[i] = f"I-{label}"
        blocks.append("\n".join(f"{t}\t{g}" for t, g in zip(tokens, tags)))
    return "\n\n".join(blocks) + "\n"


@pytest.fixture(scope="session")
def tiny_model(tmp_path_factory):
    """A small randomly initialized encoder + char vocab saved to disk.

    Keeps the suite offline; the adapter itself is model-agnostic and
    takes any hub id or local path.
    """
    from tokenizers import Tokenizer, normalizers, pre_tokenizers, processors
    from tokenizers.models import WordPiece
    from transformers import BertConfig, BertModel, BertTokenizerFast

    directory = tmp_path_factory.mktemp("tiny-model")
    chars = sorted(set(PER_CHARS + LOC_CHARS + NUM_CHARS + FILLER + MARKERS + ["點", "心"]))
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + chars
    vocab_map = {token: i for i, token in enumerate(vocab)}
    core = Tokenizer(WordPiece(vocab_map, unk_token="[UNK]"))
    core.normalizer = normalizers.BertNormalizer(lowercase=False)
    core.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    core.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab_map["[CLS]"]), ("[SEP]", vocab_map["[SEP]"])],
    )
    tokenizer = BertTokenizerFast(
        tokenizer_object=core, unk_token="[UNK]", pad_token="[PAD]",
        cls_token="[CLS]", sep_token="[SEP]", mask_token="[MASK]",
    )
    tokenizer.save_pretrained(directory)

    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    BertModel(config).save_pretrained(directory)
    return str(directory)


@pytest.fixture(scope="session")
def toy_corpora(tmp_path_factory):
    rng = random.Random(7)
    directory = tmp_path_factory.mktemp("toy-corpora")
    train = directory / "train.bio"
    train.write_text(to_bio(toy_sentences(rng, 24)), encoding="utf-8")
    test = directory / "test.bio"
    test.write_text(to_bio(toy_sentences(rng, 8)), encoding="utf-8")
    sample = directory / "sample20.bio"
    sample.write_text(to_bio(toy_sentences(rng, 20)), encoding="utf-8")
    return {"train": str(train), "test": str(test), "sample20": str(sample)}


@pytest.fixture(scope="session")
def fast_config(tiny_model):
    from nerfuse_adapter.config import AdapterConfig

    # from-scratch training of the tiny encoder needs larger steps than
    # the pretrained-model defaults
    return AdapterConfig(
        model=tiny_model,
        max_length=32,
        lr_encoder=1e-3,
        lr_head=5e-2,
        epochs=40,
        batch_size=8,
        seed=0,
    )
