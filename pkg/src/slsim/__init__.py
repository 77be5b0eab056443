"""slsim: a hardware-free 5G NR sidelink mode-2 physical-layer laboratory.

Library and CLI covering the sync-block/broadcast synchronization chain and
the shared-data chain end to end, connected by a socket-based IQ-sample RF
simulator: sequence generation, polar/LDPC coding, slot construction,
CP-OFDM, time/frequency acquisition, channel impairments, and the
BLER/RSRP experiment harness.
"""

from slsim.config import SimConfig, load_config, save_config
from slsim.harness import (
    LinkStats,
    compute_bler,
    run_nearby,
    run_session,
    run_syncref,
    sweep_attenuation,
    sweep_bler,
    wilson_interval,
)
from slsim.numerology import (
    ConfigError,
    Numerology,
    ResourceGrid,
    SlotAddress,
    SsbSchedule,
    is_ssb_occasion,
    scs_from_mu,
    ssb_occasions,
    validate_num_ssb,
)
from slsim.ofdm import OfdmConfig, demodulate, modulate
from slsim.psbch import (
    PsbchPayload,
    RsrpMode,
    SsbLayout,
    build_ssb_slot,
    decode_ssb_slot,
    measure_ssb_rsrp,
    pack_psbch,
    unpack_psbch,
)
from slsim.pssch import (
    PsschConfig,
    Sci2,
    build_pssch_slot,
    decode_pssch_slot,
    measure_pssch_rsrp,
    pack_sci2,
    unpack_sci2,
)
from slsim.rfsim import ChannelModel, RfSimServer, SocketEndpoint, inproc_link
from slsim.sequences import (
    SlssId,
    compose_slss_id,
    decompose_slss_id,
    gen_dmrs,
    gen_scrambling,
    gen_spss,
    gen_ssss,
)
from slsim.sync import (
    SyncConfig,
    SyncPhase,
    SyncState,
    Synchronizer,
    apply_cfo_correction,
    apply_timing,
    detect_spss,
    detect_ssss,
    estimate_cfo,
    sync_step,
)

__version__ = "0.1.0"
