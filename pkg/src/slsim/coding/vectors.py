"""Test-vector files for the coding stack.

One vector per line: ``<config-id> <hex input bits> <hex expected output>``.
Config ids name an encoder and its parameters, e.g. ``crc24``,
``polar:k=56,e=1782`` or ``ldpc:kp=1392,rate=0.117``.  Bit strings are
hex-encoded MSB-first and padded with zero bits to a whole nibble.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from slsim.coding.crc import crc24_attach
from slsim.coding.ldpc import LdpcConfig, ldpc_encode
from slsim.coding.polar import PolarConfig, polar_encode


def bits_to_hex(bits: np.ndarray) -> str:
    bits = np.asarray(bits, dtype=np.int8)
    value = 0
    padded = np.concatenate([bits, np.zeros((-bits.size) % 4, dtype=np.int8)])
    for b in padded:
        value = (value << 1) | int(b)
    return f"{bits.size}:{value:0{padded.size // 4}x}" if bits.size else "0:"


def hex_to_bits(text: str) -> np.ndarray:
    length_str, _, digits = text.partition(":")
    length = int(length_str)
    out = np.zeros(len(digits) * 4, dtype=np.int8)
    for i, d in enumerate(digits):
        v = int(d, 16)
        out[4 * i:4 * i + 4] = [(v >> 3) & 1, (v >> 2) & 1, (v >> 1) & 1, v & 1]
    return out[:length]


def _encoder_for(config_id: str):
    kind, _, params_text = config_id.partition(":")
    params = {}
    if params_text:
        for item in params_text.split(","):
            key, _, value = item.partition("=")
            params[key] = float(value) if "." in value else int(value)
    if kind == "crc24":
        return crc24_attach
    if kind == "polar":
        cfg = PolarConfig(k=int(params["k"]), e=int(params["e"]))
        return lambda bits: polar_encode(bits, cfg)
    if kind == "ldpc":
        cfg = LdpcConfig.for_payload(int(params["kp"]), float(params["rate"]))
        return lambda bits: ldpc_encode(bits, cfg)
    raise ValueError(f"unknown test-vector configuration {config_id!r}")


def write_test_vectors(path: str | Path,
                       vectors: list[tuple[str, np.ndarray]]) -> None:
    """Generate and store expected outputs for (config_id, input) pairs."""
    lines = []
    for config_id, bits in vectors:
        encoder = _encoder_for(config_id)
        lines.append(f"{config_id} {bits_to_hex(bits)} {bits_to_hex(encoder(bits))}")
    Path(path).write_text("\n".join(lines) + "\n")


def verify_test_vectors(path: str | Path) -> list[tuple[str, bool]]:
    """Re-encode every stored input and compare against its expected output."""
    results = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        config_id, hex_in, hex_out = line.split()
        encoder = _encoder_for(config_id)
        produced = encoder(hex_to_bits(hex_in))
        results.append((config_id, bool(np.array_equal(produced,
                                                       hex_to_bits(hex_out)))))
    return results
