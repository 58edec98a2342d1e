"""
Training Configuration
Optimisation, regularisation and multi-task settings for every training loop
"""

from typing import Literal, Optional

from pydantic import BaseModel, Field


class TrainConfig(BaseModel):
    """Desk-scale defaults; ``full_scale()`` returns the large-corpus settings"""

    epochs: int = Field(30, ge=0)
    batch_target_units: int = Field(700, ge=1)
    warmup: int = Field(200, ge=1)
    k: float = Field(1.0, gt=0)
    label_smoothing: float = Field(0.1, ge=0.0, lt=1.0)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    seed: int = 0
    average_last: int = Field(5, ge=1)
    mt_loss_weight: float = Field(1.0, ge=0.0)
    max_grad_norm: float = Field(0.0, ge=0.0)
    patience: Optional[int] = Field(None, ge=1)
    emb_avg_rate: float = Field(0.0, ge=0.0, le=1.0)
    emb_avg_sites: Literal["enc", "dec", "both"] = "both"
    freeze_mode: Literal["connector-only", "full"] = "full"
    fine_tune: bool = False

    @classmethod
    def full_scale(cls, **overrides) -> "TrainConfig":
        values = dict(epochs=150, batch_target_units=7000, warmup=25000, k=1.0, average_last=10)
        values.update(overrides)
        return cls(**values)

    def augments(self, site: str) -> bool:
        """Whether embedding averaging applies at ``site`` ("enc" or "dec")"""
        return self.emb_avg_rate > 0 and self.emb_avg_sites in (site, "both")
