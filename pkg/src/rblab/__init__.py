"""rblab: a laboratory for reliable-broadcast protocols.

Seven crash- and Byzantine-tolerant broadcast protocols implemented as
deterministic event-driven automata, an MDS erasure codec over GF(2^8), a
deterministic discrete-event network simulator with switched topologies
and bandwidth modeling, a library of Byzantine strategies and scripted
worst-case executions, and a benchmark CLI.
"""
from .adversary import (
    ConfigMismatch,
    CorruptRelay,
    Crash,
    EquivocatingSource,
    ScenarioResult,
    Scripted,
    Silent,
    Strategy,
    UnknownScenario,
    WitnessAutomaton,
    WitnessProtocolConfig,
    build_witness_world,
    build_world,
    corrupt_element,
    naive_witness_step,
    phase_of,
    run_scenario,
    script_exec1,
    script_exec2,
    script_helper4,
)
from .codec import (
    CodecError,
    CodedElement,
    CodeParams,
    FaultBudgetTooLarge,
    SubsetDecoder,
    decode_correcting,
    decode_erasure,
    encode,
)
from .core import (
    BroadcastRequest,
    Deliver,
    MalformedEnvelope,
    MsgKind,
    Receive,
    Send,
    WireMessage,
    decode_envelope,
    encode_envelope,
    envelope_size,
)
from .protocols import (
    BadCodeParams,
    ProtocolConfig,
    ProtocolKind,
    RESILIENCE,
    ResilienceViolation,
    make_automaton,
)
from .simnet import (
    FaultBudgetExceeded,
    InvalidTopology,
    NetParams,
    NotDelivered,
    SimWorld,
    StepCapExceeded,
    Topology,
    TopologyKind,
    causal_depth,
    check_acc_consistency,
    check_broadcast_properties,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "BadCodeParams", "BroadcastRequest", "CodecError", "CodeParams",
    "CodedElement", "ConfigMismatch", "CorruptRelay", "Crash", "Deliver",
    "EquivocatingSource", "FaultBudgetExceeded", "FaultBudgetTooLarge",
    "InvalidTopology", "MalformedEnvelope", "MsgKind", "NetParams",
    "NotDelivered", "ProtocolConfig", "ProtocolKind", "RESILIENCE",
    "Receive", "ResilienceViolation", "ScenarioResult", "Scripted", "Send",
    "SimWorld", "StepCapExceeded", "Strategy", "SubsetDecoder", "Topology",
    "TopologyKind", "UnknownScenario", "WireMessage", "WitnessAutomaton",
    "WitnessProtocolConfig", "build_witness_world", "build_world",
    "causal_depth", "check_acc_consistency", "check_broadcast_properties",
    "corrupt_element", "decode_correcting", "decode_envelope",
    "decode_erasure", "encode", "encode_envelope", "envelope_size",
    "make_automaton", "naive_witness_step", "phase_of", "run",
    "run_scenario", "script_exec1", "script_exec2", "script_helper4",
    "Silent", "__version__",
]
