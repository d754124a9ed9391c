from dataclasses import dataclass

DEFAULT_MODEL = "hfl/chinese-bert-wwm-ext"


@dataclass(frozen=True)
class AdapterConfig:
    """Model and fine-tuning settings.

    ``model`` is a Hugging Face hub id or a local directory.  The default
    learning rates target a pretrained encoder (small encoder steps, much
    larger steps for the structured-decoding layer); raise them when
    training small models from scratch.
    """

    model: str = DEFAULT_MODEL
    max_length: int = 150
    lr_encoder: float = 3e-5
    lr_head: float = 3e-2
    epochs: int = 30
    batch_size: int = 32
    seed: int = 13

    def __post_init__(self):
        for name in ("max_length", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr_encoder <= 0 or self.lr_head <= 0:
            raise ValueError("learning rates must be positive")
