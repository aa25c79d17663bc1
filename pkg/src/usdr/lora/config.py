from __future__ import annotations

import json
from dataclasses import asdict, dataclass

CRC_VARIANTS = ("CCITT", "IBM")

# Fine-sync acceptance: a dechirped preamble symbol must peak at bin 0 with at
# least this multiple of the median bin magnitude.
SYNC_PEAK_TO_MEDIAN = 6.0
# Coarse-sync acceptance on the normalized upchirp cross-correlation, in units
# of the noise-only standard deviation 1/sqrt(M).  Noise alone exceeds it at a
# given lag with probability exp(-16).
SYNC_CORRELATION_SIGMAS = 4.0


@dataclass(frozen=True)
class LoRaConfig:
    sf: int = 7
    bw_hz: float = 125e3
    cr: int = 1
    n_pre: int = 8
    explicit_header: bool = True
    payload_crc: bool = True
    oversample: int = 1
    crc_variant: str = "CCITT"
    sync_peak_to_median: float = SYNC_PEAK_TO_MEDIAN
    sync_correlation_threshold: float | None = None  # None: SYNC_CORRELATION_SIGMAS / sqrt(M)

    def __post_init__(self):
        if not 6 <= self.sf <= 12:
            raise ValueError(f"sf must be in 6..12, got {self.sf}")
        if not 0 <= self.cr <= 4:
            raise ValueError(f"cr must be in 0..4, got {self.cr}")
        if not self.bw_hz > 0:
            raise ValueError("bw_hz must be positive")
        if self.n_pre < 1:
            raise ValueError("n_pre must be at least 1")
        if self.oversample < 1:
            raise ValueError("oversample must be a positive integer")
        if self.explicit_header and self.sf < 7:
            raise ValueError("explicit header requires sf >= 7")
        if self.crc_variant not in CRC_VARIANTS:
            raise ValueError(f"crc_variant must be one of {CRC_VARIANTS}")

    @property
    def m(self) -> int:
        """Number of chirp positions, 2**sf."""
        return 1 << self.sf

    @property
    def symbol_duration_s(self) -> float:
        return self.m / self.bw_hz

    @property
    def sample_rate_hz(self) -> float:
        return self.bw_hz * self.oversample

    @property
    def symbol_len(self) -> int:
        """Samples per chirp symbol."""
        return self.m * self.oversample

    @property
    def correlation_threshold(self) -> float:
        if self.sync_correlation_threshold is not None:
            return self.sync_correlation_threshold
        return min(SYNC_CORRELATION_SIGMAS / self.m**0.5, 0.9)

    @property
    def payload_reduced_rate(self) -> bool:
        return self.sf >= 11

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LoRaConfig":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LoRaConfig":
        return cls.from_dict(json.loads(text))
