"""Broker-mediated XML web-services fabric for university department integration."""

__version__ = "0.1.0"
