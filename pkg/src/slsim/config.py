"""Text configuration (key=value) carrying the radio and session parameters."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from slsim.numerology import ConfigError, Numerology, SsbSchedule
from slsim.ofdm import OfdmConfig
from slsim.psbch import SsbLayout
from slsim.pssch import PsschConfig
from slsim.sequences import SlssId


@dataclass(frozen=True)
class SimConfig:
    """Everything a session or sweep needs, with lab-bench defaults:
    numerology 1 at 30.72 MS/s over 50 PRBs, two sync blocks per 160 ms
    period landing on (frame 2, slot 4) and (frame 3, slot 4)."""

    numerology_index: int = 1
    n_prb: int = 50
    fft_size: int = 1024
    sample_rate_msps: float = 30.72
    cyclic_prefix: str = "normal"

    ssb_offset_slot: int = 44
    ssb_interval_slots: int = 20
    ssb_num_per_period: int = 2

    slss_nid1: int = 42
    slss_nid2: int = 1
    in_coverage: int = 0
    tdd_config: int = 0

    mcs: int = 0
    pscch_n_rb: int = 10
    source_id: int = 0x12
    destination_id: int = 0x3456

    seed: int = 1
    data_slots: int = 20
    tx_lead_slots: int = 2
    tb_file: str = ""  # raw-byte payload source; seeded generator when empty

    def numerology(self) -> Numerology:
        return Numerology(mu=self.numerology_index, fft_size=self.fft_size,
                          sample_rate_msps=self.sample_rate_msps,
                          cyclic_prefix=self.cyclic_prefix)

    def ofdm(self) -> OfdmConfig:
        return OfdmConfig(self.numerology(), n_subcarriers=12 * self.n_prb)

    def ssb_schedule(self) -> SsbSchedule:
        return SsbSchedule(num_ssb_per_period=self.ssb_num_per_period,
                           offset_slot=self.ssb_offset_slot,
                           interval_slots=self.ssb_interval_slots)

    def ssb_layout(self) -> SsbLayout:
        return SsbLayout(carrier_n_sc=12 * self.n_prb)

    def slss_id(self) -> SlssId:
        return SlssId(nid1=self.slss_nid1, nid2=self.slss_nid2)

    def pssch(self, mcs_index: int | None = None) -> PsschConfig:
        return PsschConfig(
            n_prb=self.n_prb,
            mcs_index=self.mcs if mcs_index is None else mcs_index,
            pscch_n_rb=self.pscch_n_rb,
            dmrs_seed=self.slss_id().combined,
        )

    def with_overrides(self, **kwargs) -> "SimConfig":
        return replace(self, **kwargs)


def _parse_value(raw: str, target_type: type):
    raw = raw.strip()
    if target_type is int:
        return int(raw, 0)
    if target_type is float:
        return float(raw)
    return raw


def load_config(path: str | Path) -> SimConfig:
    """Read key=value lines; '#' starts a comment, unknown keys are errors."""
    known = {f.name: f.type for f in fields(SimConfig)}
    types = {f.name: type(getattr(SimConfig(), f.name)) for f in fields(SimConfig)}
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _parse_value(raw, types[key])
    return SimConfig(**values)


def save_config(config: SimConfig, path: str | Path) -> None:
    lines = [f"{f.name} = {getattr(config, f.name)}" for f in fields(SimConfig)]
    Path(path).write_text("\n".join(lines) + "\n")
