from .local import Bus, Subscription, publish, subscribe
from .message import MAX_FRAME, Message, decode_any, decode_frame, encode_frame, encode_subscribe, split_frame
from .tcp import DEFAULT_PORT, BusServer, RemoteBus, connect, serve
from .wiring import Wiring, bind_spec

__all__ = [
    "Bus",
    "BusServer",
    "DEFAULT_PORT",
    "MAX_FRAME",
    "Message",
    "RemoteBus",
    "Subscription",
    "Wiring",
    "bind_spec",
    "connect",
    "decode_any",
    "decode_frame",
    "encode_frame",
    "encode_subscribe",
    "publish",
    "serve",
    "split_frame",
    "subscribe",
]
