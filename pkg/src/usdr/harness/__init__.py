"""Command line, transport, sweeps, demos and metrics export."""
