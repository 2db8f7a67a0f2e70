"""Output helpers for the MRTS simulator."""
