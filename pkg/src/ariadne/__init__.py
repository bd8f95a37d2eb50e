"""Ariadne: source-routed onion packets with per-packet keys referenced by
encrypted patterns, a DH setup handshake, and a simulated network."""
import logging

from .crypto import derive_temp_keys, dh_keygen
from .data_protocol import (
    AriadnePacketBody,
    CommonHeader,
    Deliver,
    Drop,
    DropReason,
    Forward,
    Hop,
    NodeContext,
    create_packet,
    pad_payload,
    process_packet,
    unpad_payload,
)
from .deployment import DEFAULT_DEPLOYMENT, DEFAULT_PATTERN, DEFAULT_WINDOW, Deployment
from .errors import (
    AriadneError,
    MalformedPacketError,
    PathTooLongError,
    PayloadTooLongError,
    ReplayError,
)
from .key_reference import PatternTable
from .setup_protocol import SetupNode, create_setup_packet, process_setup_packet, setup_keygen

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())
