"""Deployment-wide sizes.

Every node of one deployment must agree on the number of routing slots;
all other sizes follow from it and from the 1500-byte Ethernet MTU.
"""
from dataclasses import dataclass

ADDRESS_SIZE = 16
MAC_SIZE = 16
PATTERN_SIZE = 3
ELEMENT_SIZE = 36  # pattern/pad + address + pointer + MAC
GROUP_ELEMENT_SIZE = 32
COMMON_HEADER_SIZE = 8

FRAME_SIZE = 1500
IPV6_HEADER_SIZE = 40
NEXT_HEADER_ARIADNE = 253
NO_NEXT_HEADER = 59

ROUTING_TYPE_DATA = 1
ROUTING_TYPE_SETUP = 2

DEFAULT_WINDOW = 32
DEFAULT_PATTERN = bytes.fromhex("a1d4e5")


@dataclass(frozen=True)
class Deployment:
    l_pmax: int = 5

    def __post_init__(self):
        if not 1 <= self.l_pmax <= 255:
            raise ValueError("l_pmax must fit in the one-byte slot pointer")

    @property
    def vector_size(self) -> int:
        return self.l_pmax * ELEMENT_SIZE

    @property
    def data_extension_size(self) -> int:
        return COMMON_HEADER_SIZE + self.vector_size

    @property
    def setup_extension_size(self) -> int:
        return COMMON_HEADER_SIZE + GROUP_ELEMENT_SIZE + self.vector_size

    @property
    def data_payload_size(self) -> int:
        return FRAME_SIZE - IPV6_HEADER_SIZE - self.data_extension_size

    @property
    def setup_payload_size(self) -> int:
        return FRAME_SIZE - IPV6_HEADER_SIZE - self.setup_extension_size

    @property
    def data_body_size(self) -> int:
        return self.vector_size + self.data_payload_size

    @property
    def setup_body_size(self) -> int:
        return self.vector_size + self.setup_payload_size


DEFAULT_DEPLOYMENT = Deployment()
