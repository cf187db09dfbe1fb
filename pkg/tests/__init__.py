"""Tests for the onriccati package."""
