from __future__ import annotations

import enum

MTU = 1500
CONTROL_FRAME_SIZE = 64
NUM_PRIORITIES = 8

MICE = 0
ELEPHANT = 1
CLASS_NAMES = ("mice", "elephant")


class FrameKind(enum.IntEnum):
    DATA = 0
    PAUSE = 1
    RESUME = 2
    CNM = 3
    ACK = 4


DATA = FrameKind.DATA
PAUSE = FrameKind.PAUSE
RESUME = FrameKind.RESUME
CNM = FrameKind.CNM
ACK = FrameKind.ACK


class Frame:
    """One unit on the wire.

    ``seq`` is the byte offset for DATA and the cumulative ack point for ACK.
    ``fb`` carries the quantized feedback of a CNM, ``ece`` the echoed ECN
    mark of an ACK. ``in_port`` is set by the switch that currently buffers
    the frame so the right ingress counter is released on departure.
    """

    __slots__ = (
        "kind", "flow_id", "seq", "size", "priority", "ecn", "cls",
        "src", "dst", "in_port", "fb", "ece", "sender", "ts",
    )

    def __init__(
        self,
        kind: FrameKind,
        flow_id: int,
        seq: int,
        size: int,
        priority: int,
        src: int = -1,
        dst: int = -1,
        cls: int = MICE,
    ):
        if kind == DATA:
            if not 0 < size <= MTU:
                raise ValueError(f"DATA frame size {size} outside (0, {MTU}]")
        elif size != CONTROL_FRAME_SIZE:
            raise ValueError(f"control frames are {CONTROL_FRAME_SIZE} bytes, got {size}")
        if not 0 <= priority < NUM_PRIORITIES:
            raise ValueError(f"priority {priority} outside [0, {NUM_PRIORITIES - 1}]")
        self.kind = kind
        self.flow_id = flow_id
        self.seq = seq
        self.size = size
        self.priority = priority
        self.ecn = False
        self.cls = cls
        self.src = src
        self.dst = dst
        self.in_port = -1
        self.fb = 0
        self.ece = False
        self.sender = None
        self.ts = 0

    @classmethod
    def control(cls, kind: FrameKind, priority: int = 0, flow_id: int = -1,
                src: int = -1, dst: int = -1) -> "Frame":
        return cls(kind, flow_id, 0, CONTROL_FRAME_SIZE, priority, src, dst)

    def __repr__(self) -> str:
        return (f"Frame({self.kind.name}, flow={self.flow_id}, seq={self.seq}, "
                f"size={self.size}, prio={self.priority})")
