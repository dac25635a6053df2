from .aodv import AodvProtocol, RouteEntry
from .base import ControlMessage, Discovery, ReactiveProtocol
from .dsr import DsrProtocol, RouteCache
from .multiconn import MultiConnProtocol

__all__ = ["AodvProtocol", "ControlMessage", "Discovery", "DsrProtocol",
           "MultiConnProtocol", "ReactiveProtocol", "RouteCache", "RouteEntry"]
