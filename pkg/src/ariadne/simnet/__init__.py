"""Simulated Ariadne network, unlinkability games and run configuration."""
from .games import (
    ADVERSARIES_A1,
    ADVERSARIES_A2,
    BUILTIN_ADVERSARIES,
    PATH_SESSION,
    SOURCE_SESSION,
    Challenge,
    CorruptedView,
    EqualityProfile,
    GameResult,
    GameSetupError,
    GameSpec,
    GameTranscript,
    default_game_network,
    default_specs,
    equality_profile,
    path_session_game,
    path_session_spec,
    run_game,
    source_session_game,
    source_session_spec,
)
from .network import (
    DeliveryReport,
    HopResult,
    PacketReport,
    Session,
    SimNetwork,
    SimNode,
    TapRecord,
    TraceRecord,
    address_for,
    format_address,
    run_path,
)
