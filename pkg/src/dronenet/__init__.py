"""Drone response network design under M/G/K congestion."""
