"""Deterministic discrete-event simulation of sessions on a star network."""

from .adversary import EXPECTED, SCRIPTS, AdversaryScript, RoundView, make_script
from .audit import AuditResult, RoundLog, audit
from .baseline import plaintext_bytes, plaintext_sum
from .network import SERVER, DelayModel, EventQueue, SimEvent, dump_trace, load_trace, sample_delay, trace_digest
from .runner import (
    CSV_COLUMNS,
    RoundDrops,
    RoundMetrics,
    Schedule,
    SessionReport,
    TransferRecord,
    round_inputs,
    run_round,
    run_session,
    setup_session,
    transfer,
)
from .world import Session, World
