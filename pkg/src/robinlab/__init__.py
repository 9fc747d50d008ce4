"""Finite element laboratory for parabolic Robin problems."""
