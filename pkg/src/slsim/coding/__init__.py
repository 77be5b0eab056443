"""Bit-level coding stack: CRC, polar, LDPC, rate matching, and the MCS table."""

from slsim.coding.crc import CRC24_POLY, crc24_attach, crc24_check, crc_remainder
from slsim.coding.mcs import McsEntry, mcs_lookup, tbs_compute
from slsim.coding.polar import PolarConfig, polar_decode, polar_encode
from slsim.coding.ldpc import LdpcConfig, ldpc_decode, ldpc_encode
from slsim.coding.rate_match import rate_dematch, rate_match, rv_start_offset

__all__ = [
    "CRC24_POLY",
    "crc24_attach",
    "crc24_check",
    "crc_remainder",
    "McsEntry",
    "mcs_lookup",
    "tbs_compute",
    "PolarConfig",
    "polar_encode",
    "polar_decode",
    "LdpcConfig",
    "ldpc_encode",
    "ldpc_decode",
    "rate_match",
    "rate_dematch",
    "rv_start_offset",
]
